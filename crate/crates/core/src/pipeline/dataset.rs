//! `RPDS1` dataset files.
//!
//! Layout (little-endian): magic `RPDS1`, `u32` version, `u8` kind
//! (0 = interactions, 1 = task scenes), `u8` task code (255 for
//! interactions), grid (`u32 x3` resolution, `f64` voxel size, `f64 x3`
//! origin), action descriptor (`u32` directions, `u32` actions per scene),
//! `u64` scene count, `u64` global seed, `u32` config digest, the records,
//! then a CRC32 of everything before it.
//!
//! Interaction records store the two objects, actions and effects; the pair
//! view is rebuilt from the objects and the header grid on load. Task
//! records store the objects, label, marginal flag and removal target.

use std::io::{Cursor, Read};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::PipelineError;
use crate::geom::{pairwise_view, GridSpec, ObjectInstance, ShapeKind, Vec3};
use crate::minisim::{
    ActionKind, Contact, InteractionEffect, InteractionRecord, PerturbationAction, TaskKind, ACTIONS_PER_SCENE,
    DIRECTION_COUNT,
};

const MAGIC: &[u8; 5] = b"RPDS1";
const VERSION: u32 = 1;
const NO_TASK: u8 = 255;
const NO_TARGET: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Interactions,
    Task(TaskKind),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatasetHeader {
    pub kind: DatasetKind,
    pub grid: GridSpec,
    pub directions: u32,
    pub actions_per_scene: u32,
    pub scene_count: u64,
    pub seed: u64,
    pub config_digest: u32,
}

/// A labelled task scene.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskRecord {
    pub scene_id: u64,
    pub task: TaskKind,
    pub objects: Vec<ObjectInstance>,
    pub label: bool,
    pub removal_target: Option<usize>,
    pub marginal: bool,
}

type Buf = Vec<u8>;

fn put_vec3(buf: &mut Buf, v: &Vec3) {
    for k in 0..3 {
        buf.write_f64::<LittleEndian>(v[k]).unwrap();
    }
}

fn put_object(buf: &mut Buf, o: &ObjectInstance) {
    buf.push(o.shape.code());
    for d in o.dims {
        buf.write_f64::<LittleEndian>(d).unwrap();
    }
    put_vec3(buf, &o.position);
    buf.write_f64::<LittleEndian>(o.yaw).unwrap();
}

fn put_header(buf: &mut Buf, h: &DatasetHeader) {
    buf.extend_from_slice(MAGIC);
    buf.write_u32::<LittleEndian>(VERSION).unwrap();
    let (kind, task) = match h.kind {
        DatasetKind::Interactions => (0, NO_TASK),
        DatasetKind::Task(t) => (1, t.code()),
    };
    buf.push(kind);
    buf.push(task);
    for r in h.grid.resolution {
        buf.write_u32::<LittleEndian>(r as u32).unwrap();
    }
    buf.write_f64::<LittleEndian>(h.grid.voxel_size).unwrap();
    put_vec3(buf, &h.grid.origin);
    buf.write_u32::<LittleEndian>(h.directions).unwrap();
    buf.write_u32::<LittleEndian>(h.actions_per_scene).unwrap();
    buf.write_u64::<LittleEndian>(h.scene_count).unwrap();
    buf.write_u64::<LittleEndian>(h.seed).unwrap();
    buf.write_u32::<LittleEndian>(h.config_digest).unwrap();
}

fn finish(mut buf: Buf) -> Vec<u8> {
    let crc = crc32fast::hash(&buf);
    buf.write_u32::<LittleEndian>(crc).unwrap();
    buf
}

/// Serialises interaction records. `grid` must be the pair-view grid the
/// records were generated with.
pub fn interactions_to_bytes(records: &[InteractionRecord], grid: &GridSpec, seed: u64, config_digest: u32) -> Result<Vec<u8>, PipelineError> {
    check_ids(records.iter().map(|r| r.scene_id))?;
    let header = DatasetHeader {
        kind: DatasetKind::Interactions,
        grid: *grid,
        directions: DIRECTION_COUNT as u32,
        actions_per_scene: ACTIONS_PER_SCENE as u32,
        scene_count: records.len() as u64,
        seed,
        config_digest,
    };
    let mut buf = Vec::new();
    put_header(&mut buf, &header);
    for r in records {
        if r.pair_view.grid.spec.resolution != grid.resolution || r.pair_view.grid.spec.voxel_size != grid.voxel_size {
            return Err(PipelineError::GridMismatch(format!("scene {} was voxelised on another grid", r.scene_id)));
        }
        buf.write_u64::<LittleEndian>(r.scene_id).unwrap();
        put_object(&mut buf, &r.anchor);
        put_object(&mut buf, &r.referrant);
        buf.write_u32::<LittleEndian>(r.actions.len() as u32).unwrap();
        for (a, e) in r.actions.iter().zip(&r.effects) {
            put_vec3(&mut buf, &a.direction);
            buf.write_f64::<LittleEndian>(a.magnitude).unwrap();
            buf.push(a.kind.code());
            buf.write_f64::<LittleEndian>(e.delta_p).unwrap();
            put_vec3(&mut buf, &e.delta_theta);
            put_vec3(&mut buf, &e.displacement);
            buf.push(e.blocked as u8);
            buf.write_u32::<LittleEndian>(e.contacts.len() as u32).unwrap();
            for c in &e.contacts {
                put_vec3(&mut buf, &c.point);
                put_vec3(&mut buf, &c.normal);
            }
        }
    }
    Ok(finish(buf))
}

pub fn tasks_to_bytes(task: TaskKind, records: &[TaskRecord], grid: &GridSpec, seed: u64, config_digest: u32) -> Result<Vec<u8>, PipelineError> {
    check_ids(records.iter().map(|r| r.scene_id))?;
    let header = DatasetHeader {
        kind: DatasetKind::Task(task),
        grid: *grid,
        directions: DIRECTION_COUNT as u32,
        actions_per_scene: ACTIONS_PER_SCENE as u32,
        scene_count: records.len() as u64,
        seed,
        config_digest,
    };
    let mut buf = Vec::new();
    put_header(&mut buf, &header);
    for r in records {
        if r.task != task {
            return Err(PipelineError::Data(format!("scene {} is a {} scene", r.scene_id, r.task.name())));
        }
        buf.write_u64::<LittleEndian>(r.scene_id).unwrap();
        buf.write_u32::<LittleEndian>(r.objects.len() as u32).unwrap();
        for o in &r.objects {
            put_object(&mut buf, o);
        }
        buf.push(r.label as u8);
        buf.push(r.marginal as u8);
        buf.write_u32::<LittleEndian>(r.removal_target.map_or(NO_TARGET, |t| t as u32)).unwrap();
    }
    Ok(finish(buf))
}

fn check_ids(ids: impl Iterator<Item = u64>) -> Result<(), PipelineError> {
    let mut last: Option<u64> = None;
    for id in ids {
        if last.is_some_and(|l| id <= l) {
            return Err(PipelineError::Data(format!("scene ids not strictly increasing at {id}")));
        }
        last = Some(id);
    }
    Ok(())
}

fn data_err(e: std::io::Error) -> PipelineError {
    PipelineError::Data(format!("truncated dataset: {e}"))
}

fn get_vec3(r: &mut Cursor<&[u8]>) -> Result<Vec3, PipelineError> {
    let mut v = Vec3::zeros();
    for k in 0..3 {
        v[k] = r.read_f64::<LittleEndian>().map_err(data_err)?;
    }
    Ok(v)
}

fn get_object(r: &mut Cursor<&[u8]>) -> Result<ObjectInstance, PipelineError> {
    let code = r.read_u8().map_err(data_err)?;
    let shape = ShapeKind::from_code(code).ok_or_else(|| PipelineError::Data(format!("unknown shape code {code}")))?;
    let mut dims = [0.0; 3];
    for d in dims.iter_mut() {
        *d = r.read_f64::<LittleEndian>().map_err(data_err)?;
    }
    let position = get_vec3(r)?;
    let yaw = r.read_f64::<LittleEndian>().map_err(data_err)?;
    let o = ObjectInstance { shape, dims, position, yaw };
    o.validate()?;
    Ok(o)
}

/// Verifies the trailer and parses the header, returning a reader positioned
/// at the first record.
fn open(bytes: &[u8]) -> Result<(DatasetHeader, Cursor<&[u8]>), PipelineError> {
    if bytes.len() < MAGIC.len() + 4 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(PipelineError::Data("not an RPDS1 dataset".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    if crc32fast::hash(body) != stored {
        return Err(PipelineError::Data("dataset checksum mismatch".into()));
    }
    let mut r = Cursor::new(body);
    r.set_position(MAGIC.len() as u64);
    let version = r.read_u32::<LittleEndian>().map_err(data_err)?;
    if version != VERSION {
        return Err(PipelineError::Data(format!("unsupported dataset version {version}")));
    }
    let kind_code = r.read_u8().map_err(data_err)?;
    let task_code = r.read_u8().map_err(data_err)?;
    let kind = match kind_code {
        0 => DatasetKind::Interactions,
        1 => DatasetKind::Task(TaskKind::from_code(task_code).ok_or_else(|| PipelineError::Data(format!("unknown task code {task_code}")))?),
        k => return Err(PipelineError::Data(format!("unknown dataset kind {k}"))),
    };
    let mut resolution = [0usize; 3];
    for v in resolution.iter_mut() {
        *v = r.read_u32::<LittleEndian>().map_err(data_err)? as usize;
    }
    let voxel_size = r.read_f64::<LittleEndian>().map_err(data_err)?;
    let origin = get_vec3(&mut r)?;
    let grid = GridSpec::new(resolution, voxel_size, origin);
    grid.validate()?;
    let header = DatasetHeader {
        kind,
        grid,
        directions: r.read_u32::<LittleEndian>().map_err(data_err)?,
        actions_per_scene: r.read_u32::<LittleEndian>().map_err(data_err)?,
        scene_count: r.read_u64::<LittleEndian>().map_err(data_err)?,
        seed: r.read_u64::<LittleEndian>().map_err(data_err)?,
        config_digest: r.read_u32::<LittleEndian>().map_err(data_err)?,
    };
    Ok((header, r))
}

fn expect_end(r: &Cursor<&[u8]>) -> Result<(), PipelineError> {
    if (r.position() as usize) != r.get_ref().len() {
        return Err(PipelineError::Data("trailing bytes after last record".into()));
    }
    Ok(())
}

pub fn interactions_from_bytes(bytes: &[u8]) -> Result<(DatasetHeader, Vec<InteractionRecord>), PipelineError> {
    let (header, mut r) = open(bytes)?;
    if header.kind != DatasetKind::Interactions {
        return Err(PipelineError::Data("expected an interaction dataset".into()));
    }
    let mut records = Vec::with_capacity(header.scene_count.min(1 << 20) as usize);
    for _ in 0..header.scene_count {
        let scene_id = r.read_u64::<LittleEndian>().map_err(data_err)?;
        let anchor = get_object(&mut r)?;
        let referrant = get_object(&mut r)?;
        let n = r.read_u32::<LittleEndian>().map_err(data_err)? as usize;
        let mut actions = Vec::with_capacity(n.min(1024));
        let mut effects = Vec::with_capacity(n.min(1024));
        for _ in 0..n {
            let direction = get_vec3(&mut r)?;
            let magnitude = r.read_f64::<LittleEndian>().map_err(data_err)?;
            let code = r.read_u8().map_err(data_err)?;
            let kind = ActionKind::from_code(code).ok_or_else(|| PipelineError::Data(format!("unknown action kind {code}")))?;
            actions.push(PerturbationAction { direction, magnitude, kind });
            let delta_p = r.read_f64::<LittleEndian>().map_err(data_err)?;
            let delta_theta = get_vec3(&mut r)?;
            let displacement = get_vec3(&mut r)?;
            let blocked = r.read_u8().map_err(data_err)? != 0;
            let nc = r.read_u32::<LittleEndian>().map_err(data_err)? as usize;
            let mut contacts = Vec::with_capacity(nc.min(1024));
            for _ in 0..nc {
                contacts.push(Contact { point: get_vec3(&mut r)?, normal: get_vec3(&mut r)? });
            }
            effects.push(InteractionEffect { delta_p, delta_theta, contacts, blocked, displacement });
        }
        let pair_view = pairwise_view(&[anchor, referrant], 0, 1, &header.grid)?;
        records.push(InteractionRecord { scene_id, anchor, referrant, pair_view, actions, effects });
    }
    expect_end(&r)?;
    check_ids(records.iter().map(|r| r.scene_id))?;
    Ok((header, records))
}

pub fn tasks_from_bytes(bytes: &[u8]) -> Result<(DatasetHeader, Vec<TaskRecord>), PipelineError> {
    let (header, mut r) = open(bytes)?;
    let DatasetKind::Task(task) = header.kind else {
        return Err(PipelineError::Data("expected a task dataset".into()));
    };
    let mut records = Vec::with_capacity(header.scene_count.min(1 << 20) as usize);
    for _ in 0..header.scene_count {
        let scene_id = r.read_u64::<LittleEndian>().map_err(data_err)?;
        let n = r.read_u32::<LittleEndian>().map_err(data_err)? as usize;
        let objects = (0..n).map(|_| get_object(&mut r)).collect::<Result<Vec<_>, _>>()?;
        let label = r.read_u8().map_err(data_err)? != 0;
        let marginal = r.read_u8().map_err(data_err)? != 0;
        let target = r.read_u32::<LittleEndian>().map_err(data_err)?;
        let removal_target = (target != NO_TARGET).then_some(target as usize);
        if removal_target.is_some_and(|t| t >= n) {
            return Err(PipelineError::Data(format!("scene {scene_id}: removal target {target} out of range")));
        }
        records.push(TaskRecord { scene_id, task, objects, label, removal_target, marginal });
    }
    expect_end(&r)?;
    check_ids(records.iter().map(|r| r.scene_id))?;
    Ok((header, records))
}

fn read_file(path: &Path) -> Result<Vec<u8>, PipelineError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    Ok(bytes)
}

pub fn read_interactions(path: &Path) -> Result<(DatasetHeader, Vec<InteractionRecord>), PipelineError> {
    interactions_from_bytes(&read_file(path)?)
}

pub fn read_tasks(path: &Path) -> Result<(DatasetHeader, Vec<TaskRecord>), PipelineError> {
    tasks_from_bytes(&read_file(path)?)
}

pub fn write_interactions(path: &Path, records: &[InteractionRecord], grid: &GridSpec, seed: u64, digest: u32) -> Result<(), PipelineError> {
    std::fs::write(path, interactions_to_bytes(records, grid, seed, digest)?)?;
    Ok(())
}

pub fn write_tasks(path: &Path, task: TaskKind, records: &[TaskRecord], grid: &GridSpec, seed: u64, digest: u32) -> Result<(), PipelineError> {
    std::fs::write(path, tasks_to_bytes(task, records, grid, seed, digest)?)?;
    Ok(())
}
