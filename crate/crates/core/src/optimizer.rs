//! Exhaustive search over bulb designs (boards per layer, divergence
//! angle) under a total power budget, for the plain-SIR and
//! illumination-constrained objectives.

use crate::channel::floor_irradiance_map;
use crate::error::{Error, Result};
use crate::geometry::{build_bulb, BulbDesign, RoomSpec};
use crate::metrics::{from_db, illumination_stats, pair_sir_db, DbClamp};
use crate::rng::stream_rng;
use crate::vec::Vec2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    SirOnly,
    SirOverIllumVariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSpace {
    /// Inclusive (min, max) board count per layer, one entry per layer of
    /// the template bulb.
    pub boards_per_layer: Vec<(usize, usize)>,
    /// Divergence sweep (min, max, step), degrees.
    pub divergence_deg: (f64, f64, f64),
    /// Total bulb power budget, watts.
    pub power_constraint: f64,
    pub per_board_power: f64,
    pub objective: Objective,
}

impl DesignSpace {
    pub fn validate(&self) -> Result<()> {
        if self.boards_per_layer.is_empty()
            || self.boards_per_layer.iter().any(|&(lo, hi)| lo < 1 || hi < lo)
        {
            return Err(Error::invalid(
                "boards_per_layer",
                "each layer needs a non-empty range with min >= 1",
            ));
        }
        let (lo, hi, step) = self.divergence_deg;
        if step <= 0.0 || lo <= 0.0 || hi < lo || hi > 90.0 {
            return Err(Error::invalid(
                "divergence_deg",
                "need 0 < min <= max <= 90 and step > 0",
            ));
        }
        if self.power_constraint <= 0.0 {
            return Err(Error::invalid("power_constraint", "must be positive"));
        }
        if self.per_board_power <= 0.0 {
            return Err(Error::invalid("per_board_power", "must be positive"));
        }
        Ok(())
    }

    fn divergence_steps(&self) -> Vec<f64> {
        let (lo, hi, step) = self.divergence_deg;
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| lo + i as f64 * step).collect()
    }
}

/// Fixed receiver-placement protocol shared by all candidate evaluations,
/// so designs are compared on identical placements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalProtocol {
    pub n_placements: usize,
    pub seed: u64,
    pub clamp: DbClamp,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        EvalProtocol {
            n_placements: 200,
            seed: 0,
            clamp: DbClamp::default(),
        }
    }
}

impl EvalProtocol {
    /// Receiver-pair placements, uniform over the floor, derived per
    /// sample index so parallel evaluation stays deterministic.
    pub fn placements(&self, room: &RoomSpec) -> Vec<(Vec2, Vec2)> {
        (0..self.n_placements)
            .map(|i| {
                let mut rng = stream_rng(self.seed, &[0x70_6c_61_63, i as u64]);
                let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
                    Vec2::new(
                        rng.gen_range(0.0..room.width),
                        rng.gen_range(0.0..room.depth),
                    )
                };
                let r1 = draw(&mut rng);
                let mut r2 = draw(&mut rng);
                while r2 == r1 {
                    r2 = draw(&mut rng);
                }
                (r1, r2)
            })
            .collect()
    }
}

/// Evaluation of one design: SIR averaged over the protocol's placements
/// plus floor illumination statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesignEval {
    pub mean_sir_db: f64,
    pub illum_mean: f64,
    pub illum_std: f64,
    /// True when some placement had a zero-signal receiver; such designs
    /// score −∞ in the optimizer.
    pub zero_coverage: bool,
}

impl DesignEval {
    pub fn illum_variance(&self) -> f64 {
        self.illum_std * self.illum_std
    }

    pub fn objective(&self, objective: Objective) -> f64 {
        if self.zero_coverage {
            return f64::NEG_INFINITY;
        }
        match objective {
            Objective::SirOnly => self.mean_sir_db,
            Objective::SirOverIllumVariance => {
                let var = self.illum_variance().max(f64::MIN_POSITIVE);
                from_db(self.mean_sir_db) / var
            }
        }
    }
}

pub fn evaluate_design(
    design: &BulbDesign,
    room: &RoomSpec,
    protocol: &EvalProtocol,
) -> Result<DesignEval> {
    evaluate_on_placements(design, room, &protocol.placements(room), protocol.clamp)
}

fn evaluate_on_placements(
    design: &BulbDesign,
    room: &RoomSpec,
    placements: &[(Vec2, Vec2)],
    clamp: DbClamp,
) -> Result<DesignEval> {
    let boards = build_bulb(design)?;
    let per_pair: Vec<(f64, f64)> = placements
        .par_iter()
        .map(|&(r1, r2)| pair_sir_db(&boards, room, r1, r2, clamp))
        .collect();
    let mut acc = 0.0;
    let mut zero_coverage = false;
    for &(a, b) in &per_pair {
        acc += (a + b) / 2.0;
        if a <= clamp.min_db || b <= clamp.min_db {
            zero_coverage = true;
        }
    }
    let stats = illumination_stats(&floor_irradiance_map(&boards, room));
    Ok(DesignEval {
        mean_sir_db: acc / placements.len() as f64,
        illum_mean: stats.mean,
        illum_std: stats.std_dev,
        zero_coverage,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimResult {
    pub best_design: BulbDesign,
    pub best_objective: f64,
    pub best_sir_db: f64,
    pub illum_std: f64,
    pub illum_variance: f64,
}

/// Candidate enumeration shared by `grid_search` and its brute-force test
/// oracle: cartesian product of per-layer board counts and divergence
/// steps, filtered by the power budget.
pub fn enumerate_candidates(space: &DesignSpace, template: &BulbDesign) -> Vec<BulbDesign> {
    assert_eq!(
        space.boards_per_layer.len(),
        template.layers.len(),
        "design space must cover every template layer"
    );
    let mut counts: Vec<Vec<usize>> = vec![vec![]];
    for &(lo, hi) in &space.boards_per_layer {
        let mut next = Vec::new();
        for prefix in &counts {
            for c in lo..=hi {
                let mut v = prefix.clone();
                v.push(c);
                next.push(v);
            }
        }
        counts = next;
    }
    let mut out = Vec::new();
    for combo in &counts {
        let total: usize = combo.iter().sum();
        if total as f64 * space.per_board_power > space.power_constraint + 1e-9 {
            continue;
        }
        for &div in &space.divergence_steps() {
            let mut design = template.clone();
            design.divergence_deg = div;
            design.power_per_board = space.per_board_power;
            for (layer, &c) in design.layers.iter_mut().zip(combo) {
                layer.board_count = c;
            }
            out.push(design);
        }
    }
    out
}

/// Exhaustive search over the design space; deterministic tie-break by
/// (fewer total boards, then smaller divergence).
pub fn grid_search(
    space: &DesignSpace,
    template: &BulbDesign,
    room: &RoomSpec,
    protocol: &EvalProtocol,
) -> Result<OptimResult> {
    space.validate()?;
    let candidates = enumerate_candidates(space, template);
    if candidates.is_empty() {
        return Err(Error::EmptyFeasibleSet);
    }
    let placements = protocol.placements(room);
    let evals: Vec<(BulbDesign, DesignEval)> = candidates
        .into_iter()
        .map(|d| {
            let e = evaluate_on_placements(&d, room, &placements, protocol.clamp)?;
            Ok((d, e))
        })
        .collect::<Result<_>>()?;
    let mut best: Option<(&BulbDesign, &DesignEval, f64)> = None;
    for (d, e) in &evals {
        let score = e.objective(space.objective);
        let better = match best {
            None => true,
            Some((bd, _, bs)) => {
                score > bs
                    || (score == bs
                        && (d.total_boards() < bd.total_boards()
                            || (d.total_boards() == bd.total_boards()
                                && d.divergence_deg < bd.divergence_deg)))
            }
        };
        if better {
            best = Some((d, e, score));
        }
    }
    let (design, eval, score) = best.expect("non-empty candidate list");
    Ok(OptimResult {
        best_design: design.clone(),
        best_objective: score,
        best_sir_db: eval.mean_sir_db,
        illum_std: eval.illum_std,
        illum_variance: eval.illum_variance(),
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FrontierRow {
    pub budget_w: f64,
    pub sir_unconstrained_db: f64,
    pub sir_constrained_db: f64,
    pub illum_variance: f64,
    pub objective_value: f64,
}

/// Runs `grid_search` per budget for both objectives (Fig-5-style
/// frontier).
pub fn power_sweep(
    space: &DesignSpace,
    template: &BulbDesign,
    budgets: &[f64],
    room: &RoomSpec,
    protocol: &EvalProtocol,
) -> Result<Vec<FrontierRow>> {
    if budgets.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("budgets", "must be ascending"));
    }
    budgets
        .iter()
        .map(|&budget| {
            let unconstrained = grid_search(
                &DesignSpace {
                    power_constraint: budget,
                    objective: Objective::SirOnly,
                    ..space.clone()
                },
                template,
                room,
                protocol,
            )?;
            let constrained = grid_search(
                &DesignSpace {
                    power_constraint: budget,
                    objective: Objective::SirOverIllumVariance,
                    ..space.clone()
                },
                template,
                room,
                protocol,
            )?;
            Ok(FrontierRow {
                budget_w: budget,
                sir_unconstrained_db: unconstrained.best_sir_db,
                sir_constrained_db: constrained.best_sir_db,
                illum_variance: constrained.illum_variance,
                objective_value: constrained.best_objective,
            })
        })
        .collect()
}

/// Mean SIR per divergence angle, averaged over the listed total source
/// powers (Fig-3b-style sweep).
pub fn divergence_sweep(
    template: &BulbDesign,
    angles_deg: &[f64],
    total_powers_w: &[f64],
    room: &RoomSpec,
    protocol: &EvalProtocol,
) -> Result<Vec<(f64, f64)>> {
    if angles_deg.iter().any(|&a| a <= 0.0 || a >= 90.0) {
        return Err(Error::invalid("angles", "must be within (0, 90) degrees"));
    }
    let placements = protocol.placements(room);
    let n_boards = template.total_boards() as f64;
    angles_deg
        .iter()
        .map(|&angle| {
            let mut acc = 0.0;
            for &power in total_powers_w {
                let design = BulbDesign {
                    divergence_deg: angle,
                    power_per_board: power / n_boards,
                    ..template.clone()
                };
                let eval = evaluate_on_placements(&design, room, &placements, protocol.clamp)?;
                acc += eval.mean_sir_db;
            }
            Ok((angle, acc / total_powers_w.len() as f64))
        })
        .collect()
}
