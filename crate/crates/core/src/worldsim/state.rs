use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layout::{EntityKind, SlotLayout};
use crate::error::NtpError;
use crate::taskgen::TaskInstance;

pub const GRASP_TOLERANCE: f64 = 0.02;
pub const HOVER_OFFSET: f64 = 0.05;
pub const OBJECT_HEIGHT: f64 = 0.05;
pub const SENTINEL: f64 = 1000.0;
pub const MIN_SEPARATION: f64 = 0.08;
pub const PLACEMENT_HALF_WIDTH: f64 = 0.6;
pub const CONTAINER_RADIUS: f64 = 0.15;
pub const CONTAINER_ANCHORS: [(f64, f64); 4] = [(-0.8, -0.8), (0.8, -0.8), (-0.8, 0.8), (0.8, 0.8)];
pub const HOME: Position3 = Position3 { x: 0.0, y: 0.0, z: 0.5 };
const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Position3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Position3 { x, y, z }
    }

    pub fn offset(self, dx: f64, dy: f64, dz: f64) -> Self {
        Position3::new(self.x + dx, self.y + dy, self.z + dz)
    }

    pub fn xy_dist(self, o: Position3) -> f64 {
        (self.x - o.x).hypot(self.y - o.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    Table,
    Object(usize),
    Container(usize),
    Gripper,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub id: usize,
    pub kind: EntityKind,
    pub category: usize,
    pub position: Position3,
    pub supported_by: Support,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Container {
    pub id: usize,
    pub position: Position3,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GripperState {
    pub position: Position3,
    pub closed: bool,
    pub held: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    /// Present objects ordered by id.
    pub objects: Vec<ObjectState>,
    pub containers: Vec<Container>,
    pub gripper: GripperState,
    pub step_count: u64,
    pub num_slots: usize,
}

pub type Observation = Vec<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "api", content = "target", rename_all = "snake_case")]
pub enum ApiCall {
    MoveTo(usize),
    Grip,
    Release,
}

/// One line of the API event log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApiEvent {
    pub step: u64,
    pub api: String,
    pub args: Vec<usize>,
    pub grasp_miss: bool,
}

impl ApiCall {
    pub fn name(self) -> &'static str {
        match self {
            ApiCall::MoveTo(_) => "move_to",
            ApiCall::Grip => "grip",
            ApiCall::Release => "release",
        }
    }

    pub fn args(self) -> Vec<usize> {
        match self {
            ApiCall::MoveTo(t) => vec![t],
            _ => Vec::new(),
        }
    }
}

/// Uniform table position clear of containers and of `occupied` positions.
pub(crate) fn sample_free_xy(
    rng: &mut ChaCha8Rng,
    containers: &[Container],
    occupied: &[Position3],
) -> Result<Position3, NtpError> {
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        let p = Position3::new(
            rng.gen_range(-PLACEMENT_HALF_WIDTH..=PLACEMENT_HALF_WIDTH),
            rng.gen_range(-PLACEMENT_HALF_WIDTH..=PLACEMENT_HALF_WIDTH),
            0.0,
        );
        let clear_of_containers = containers.iter().all(|c| p.xy_dist(c.position) >= c.radius + MIN_SEPARATION / 2.0);
        if clear_of_containers && occupied.iter().all(|o| p.xy_dist(*o) >= MIN_SEPARATION) {
            return Ok(p);
        }
    }
    Err(NtpError::UnsatisfiableLayout(format!(
        "no free table position after {MAX_PLACEMENT_ATTEMPTS} attempts with {} objects placed",
        occupied.len()
    )))
}

/// Places the task's objects at random collision-free positions with the
/// gripper open at home. Deterministic in `(task, seed)`.
pub fn reset(task: &TaskInstance, seed: u64) -> Result<WorldState, NtpError> {
    task.validate()?;
    let layout = SlotLayout::for_task(task);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut anchors = CONTAINER_ANCHORS.to_vec();
    anchors.shuffle(&mut rng);
    let containers: Vec<Container> = (0..layout.num_containers())
        .map(|id| Container { id, position: Position3::new(anchors[id].0, anchors[id].1, 0.0), radius: CONTAINER_RADIUS })
        .collect();
    let mut occupied = Vec::new();
    let mut objects = Vec::new();
    for id in layout.present_objects(task) {
        let p = sample_free_xy(&mut rng, &containers, &occupied)?;
        occupied.push(p);
        let desc = layout.slots[id];
        objects.push(ObjectState { id, kind: desc.kind, category: desc.category, position: p, supported_by: Support::Table });
    }
    Ok(WorldState {
        objects,
        containers,
        gripper: GripperState { position: HOME, closed: false, held: None },
        step_count: 0,
        num_slots: layout.len(),
    })
}

impl WorldState {
    pub fn object(&self, id: usize) -> Option<&ObjectState> {
        self.objects.binary_search_by_key(&id, |o| o.id).ok().map(|i| &self.objects[i])
    }

    fn object_index(&self, id: usize) -> Option<usize> {
        self.objects.binary_search_by_key(&id, |o| o.id).ok()
    }

    pub fn container(&self, id: usize) -> Option<&Container> {
        self.containers.iter().find(|c| c.id == id)
    }

    pub fn is_present(&self, id: usize) -> bool {
        self.container(id).is_some() || self.object(id).is_some()
    }

    pub fn entity_position(&self, id: usize) -> Option<Position3> {
        self.container(id).map(|c| c.position).or_else(|| self.object(id).map(|o| o.position))
    }

    /// Whether anything rests on object `id`.
    pub fn is_clear(&self, id: usize) -> bool {
        !self.objects.iter().any(|o| o.supported_by == Support::Object(id))
    }

    /// Follows supporters down to the table, a container or the gripper.
    pub fn root_support(&self, id: usize) -> Support {
        let mut cur = id;
        for _ in 0..=self.objects.len() {
            match self.object(cur).map(|o| o.supported_by) {
                Some(Support::Object(below)) => cur = below,
                Some(s) => return s,
                None => break,
            }
        }
        Support::Table
    }

    /// Executes one primitive. Grasp misses are reported in the event, not
    /// as errors.
    pub fn step_api(&mut self, call: ApiCall) -> Result<ApiEvent, NtpError> {
        let mut grasp_miss = false;
        match call {
            ApiCall::MoveTo(target) => {
                if self.gripper.held == Some(target) {
                    return Err(NtpError::ApiArgument(format!("target {target} is the held object")));
                }
                let p = self
                    .entity_position(target)
                    .ok_or_else(|| NtpError::ApiArgument(format!("no entity at target index {target}")))?;
                self.gripper.position = p.offset(0.0, 0.0, HOVER_OFFSET);
                self.sync_held();
            }
            ApiCall::Grip => {
                self.gripper.closed = true;
                if self.gripper.held.is_none() {
                    match self.graspable() {
                        Some(id) => {
                            self.gripper.held = Some(id);
                            let i = self.object_index(id).expect("graspable object exists");
                            self.objects[i].supported_by = Support::Gripper;
                            self.sync_held();
                        }
                        None => grasp_miss = true,
                    }
                }
            }
            ApiCall::Release => {
                self.gripper.closed = false;
                if let Some(id) = self.gripper.held.take() {
                    let (support, pos) = self.landing_spot(id);
                    let i = self.object_index(id).expect("held object exists");
                    self.objects[i].supported_by = support;
                    self.objects[i].position = pos;
                }
            }
        }
        self.step_count += 1;
        Ok(ApiEvent { step: self.step_count - 1, api: call.name().to_string(), args: call.args(), grasp_miss })
    }

    fn sync_held(&mut self) {
        if let Some(id) = self.gripper.held {
            let p = self.gripper.position;
            if let Some(i) = self.object_index(id) {
                self.objects[i].position = p;
            }
        }
    }

    /// Topmost object whose grasp point lies within tolerance of the
    /// gripper, provided nothing rests on it.
    fn graspable(&self) -> Option<usize> {
        let g = self.gripper.position;
        let top = self
            .objects
            .iter()
            .filter(|o| o.supported_by != Support::Gripper)
            .filter(|o| o.position.xy_dist(g) <= GRASP_TOLERANCE)
            .filter(|o| (g.z - (o.position.z + OBJECT_HEIGHT)).abs() <= GRASP_TOLERANCE)
            .max_by(|a, b| a.position.z.total_cmp(&b.position.z).then(b.id.cmp(&a.id)))?;
        self.is_clear(top.id).then_some(top.id)
    }

    /// Where a released object comes to rest.
    fn landing_spot(&self, held: usize) -> (Support, Position3) {
        let g = self.gripper.position;
        let below = self
            .objects
            .iter()
            .filter(|o| o.id != held && o.supported_by != Support::Gripper)
            .filter(|o| o.position.xy_dist(g) <= GRASP_TOLERANCE)
            .max_by(|a, b| a.position.z.total_cmp(&b.position.z).then(b.id.cmp(&a.id)));
        if let Some(o) = below {
            let receptacle = match o.supported_by {
                Support::Container(_) => true,
                Support::Object(s) => self.object(s).is_some_and(|s| s.kind == EntityKind::Bowl),
                _ => false,
            };
            if o.kind.is_item() && receptacle {
                return (o.supported_by, o.position);
            }
            return (Support::Object(o.id), o.position.offset(0.0, 0.0, OBJECT_HEIGHT));
        }
        if let Some(c) = self.containers.iter().find(|c| c.position.xy_dist(g) <= c.radius) {
            return (Support::Container(c.id), c.position);
        }
        (Support::Table, Position3::new(g.x, g.y, 0.0))
    }

    /// Gripper-relative coordinates per slot followed by the aperture.
    pub fn observe(&self) -> Observation {
        let mut obs = vec![SENTINEL; 3 * self.num_slots + 1];
        let g = self.gripper.position;
        let entities = self
            .containers
            .iter()
            .map(|c| (c.id, c.position))
            .chain(self.objects.iter().map(|o| (o.id, o.position)));
        for (id, p) in entities {
            obs[3 * id] = p.x - g.x;
            obs[3 * id + 1] = p.y - g.y;
            obs[3 * id + 2] = p.z - g.z;
        }
        obs[3 * self.num_slots] = if self.gripper.closed { 0.0 } else { 1.0 };
        obs
    }

    /// Translates gripper, objects and containers jointly.
    pub fn translate(&mut self, dx: f64, dy: f64, dz: f64) {
        self.gripper.position = self.gripper.position.offset(dx, dy, dz);
        for o in &mut self.objects {
            o.position = o.position.offset(dx, dy, dz);
        }
        for c in &mut self.containers {
            c.position = c.position.offset(dx, dy, dz);
        }
    }

    /// Structural invariants; returns a description of the first violation.
    pub fn check_invariants(&self) -> Result<(), String> {
        let held: Vec<_> = self.objects.iter().filter(|o| o.supported_by == Support::Gripper).collect();
        if held.len() > 1 {
            return Err(format!("{} objects held", held.len()));
        }
        if let Some(h) = held.first() {
            if self.gripper.held != Some(h.id) || !self.gripper.closed {
                return Err("held object not registered with a closed gripper".into());
            }
            if h.position != self.gripper.position {
                return Err("held object does not track the gripper".into());
            }
        } else if self.gripper.held.is_some() {
            return Err("gripper holds a missing object".into());
        }
        for o in &self.objects {
            // Walking more links than there are objects means a cycle.
            let mut cur = o.id;
            let mut steps = 0;
            while let Some(Support::Object(b)) = self.object(cur).map(|x| x.supported_by) {
                let (upper, lower) = (self.object(cur).unwrap(), self.object(b).ok_or("missing supporter")?);
                if upper.position.xy_dist(lower.position) > 1e-9 {
                    return Err(format!("object {} not aligned with supporter {b}", upper.id));
                }
                cur = b;
                steps += 1;
                if steps > self.objects.len() {
                    return Err("support cycle".into());
                }
            }
            if let Support::Container(c) = o.supported_by {
                if self.container(c).is_none() {
                    return Err(format!("object {} in missing container {c}", o.id));
                }
            }
        }
        Ok(())
    }
}
