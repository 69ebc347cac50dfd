//! Splitting the bulb's boards among receivers: the perpendicular-bisector
//! rule for two receivers and its nearest-projection generalization.

use crate::error::{Error, Result};
use crate::geometry::{boresight_floor_projection, RoomSpec, TransmitterBoard};
use crate::vec::Vec2;
use serde::Serialize;
use std::collections::BTreeMap;

/// Disjoint board → receiver assignment plus the receiver positions it was
/// computed from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    pub assignment: BTreeMap<u32, u32>,
    pub receiver_positions_snapshot: Vec<(u32, Vec2)>,
}

impl Partition {
    /// Board ids assigned to one receiver.
    pub fn boards_of(&self, receiver_id: u32) -> Vec<u32> {
        self.assignment
            .iter()
            .filter(|&(_, &r)| r == receiver_id)
            .map(|(&b, _)| b)
            .collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(w, "board_id,receiver_id")?;
        for (b, r) in &self.assignment {
            writeln!(w, "{b},{r}")?;
        }
        Ok(())
    }
}

/// Floor point a board is attributed to: its boresight floor projection,
/// falling back to the board's horizontal position for rays that never
/// reach the floor.
fn board_anchor(board: &TransmitterBoard, room: &RoomSpec) -> Vec2 {
    match boresight_floor_projection(board, room) {
        Some(p) => p.point,
        None => board.position.xy(),
    }
}

/// Two-receiver split along the perpendicular bisector of the segment
/// r1–r2. Boards whose projection lies on r1's side go to `id1`; exact
/// bisector hits go to the lower receiver id.
pub fn bisector_partition(
    (id1, r1): (u32, Vec2),
    (id2, r2): (u32, Vec2),
    boards: &[TransmitterBoard],
    room: &RoomSpec,
) -> Result<Partition> {
    if r1 == r2 {
        return Err(Error::CoincidentReceivers);
    }
    if boards.is_empty() {
        return Err(Error::invalid("boards", "must be non-empty"));
    }
    let mid = (r1 + r2) * 0.5;
    let axis = r1 - r2;
    let mut assignment = BTreeMap::new();
    for b in boards {
        let anchor = board_anchor(b, room);
        let side = (anchor - mid).dot(axis);
        let receiver = if side > 0.0 {
            id1
        } else if side < 0.0 {
            id2
        } else {
            id1.min(id2)
        };
        assignment.insert(b.id, receiver);
    }
    Ok(Partition {
        assignment,
        receiver_positions_snapshot: vec![(id1, r1), (id2, r2)],
    })
}

/// N-receiver generalization: each board goes to the receiver nearest its
/// boresight floor projection (ties to the lower receiver id). Coincides
/// with `bisector_partition` for exactly two receivers.
pub fn repartition(
    receivers: &[(u32, Vec2)],
    boards: &[TransmitterBoard],
    room: &RoomSpec,
) -> Result<Partition> {
    if receivers.is_empty() {
        return Err(Error::invalid("receivers", "must be non-empty"));
    }
    if boards.is_empty() {
        return Err(Error::invalid("boards", "must be non-empty"));
    }
    for i in 0..receivers.len() {
        for j in (i + 1)..receivers.len() {
            if receivers[i].1 == receivers[j].1 {
                return Err(Error::CoincidentReceivers);
            }
        }
    }
    let mut assignment = BTreeMap::new();
    for b in boards {
        let anchor = board_anchor(b, room);
        let mut best = receivers[0];
        let mut best_d = anchor.distance_sq(receivers[0].1);
        for &(id, p) in &receivers[1..] {
            let d = anchor.distance_sq(p);
            if d < best_d || (d == best_d && id < best.0) {
                best = (id, p);
                best_d = d;
            }
        }
        assignment.insert(b.id, best.0);
    }
    Ok(Partition {
        assignment,
        receiver_positions_snapshot: receivers.to_vec(),
    })
}
