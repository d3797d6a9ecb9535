//! Time-sampled solutions.

use crate::error::{invalid, Result};
use crate::numerics::Axis;
use crate::sigma::{MacroField, MacroGrid, TwoScaleField};

/// Snapshots of a time-dependent solution at uniform times `0 = t₀ < … <
/// t_M = T`, with per-snapshot norms.
#[derive(Debug, Clone)]
pub struct FieldTrajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub l1: Vec<f64>,
    pub l2: Vec<f64>,
    /// A-priori bound the norms were checked against, when one applies.
    pub bound: Option<f64>,
    pub warnings: Vec<String>,
}

impl<S> FieldTrajectory<S> {
    pub fn new(bound: Option<f64>) -> Self {
        Self {
            times: Vec::new(),
            states: Vec::new(),
            l1: Vec::new(),
            l2: Vec::new(),
            bound,
            warnings: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, state: S, l1: f64, l2: f64) {
        self.times.push(t);
        self.states.push(state);
        self.l1.push(l1);
        self.l2.push(l2);
    }

    pub fn last(&self) -> Option<&S> {
        self.states.last()
    }

    /// `sup_t (‖u(t)‖₁ + ‖u(t)‖₂)`.
    pub fn norm_peak(&self) -> f64 {
        self.l1.iter().zip(&self.l2).map(|(a, b)| a + b).fold(0.0, f64::max)
    }

    fn time_axis(&self) -> Result<Axis> {
        let m = self.times.len();
        if m < 2 {
            return Err(invalid("trajectory needs at least two snapshots"));
        }
        let dt = self.times[1] - self.times[0];
        let uniform = self
            .times
            .windows(2)
            .all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.abs().max(1e-300));
        if !uniform {
            return Err(invalid("snapshot times are not uniform"));
        }
        Ok(Axis::new(self.times[0], dt, m))
    }

    fn space_time_grid(&self, space: &MacroGrid) -> Result<MacroGrid> {
        let mut axes = space.axes().to_vec();
        axes.push(self.time_axis()?);
        MacroGrid::new(axes, space.n_space())
    }
}

impl FieldTrajectory<MacroField> {
    /// The whole trajectory as one field on space × time (time last).
    pub fn space_time(&self) -> Result<MacroField> {
        let first = self.states.first().ok_or_else(|| invalid("empty trajectory"))?;
        let grid = self.space_time_grid(&first.grid)?;
        let nt = self.states.len();
        let mut values = vec![0.0; first.values.len() * nt];
        for (k, st) in self.states.iter().enumerate() {
            for (i, v) in st.values.iter().enumerate() {
                values[i * nt + k] = *v;
            }
        }
        MacroField::new(grid, values)
    }
}

impl FieldTrajectory<TwoScaleField> {
    /// The whole trajectory as one two-scale field with macro variables
    /// space × time.
    pub fn space_time(&self) -> Result<TwoScaleField> {
        let first = self.states.first().ok_or_else(|| invalid("empty trajectory"))?;
        let grid = self.space_time_grid(first.macro_grid())?;
        let nt = self.states.len();
        let m = first.torus_len();
        let nx = first.macro_grid().len();
        let mut values = vec![0.0; nx * nt * m];
        for (k, st) in self.states.iter().enumerate() {
            for i in 0..nx {
                let dst = (i * nt + k) * m;
                values[dst..dst + m].copy_from_slice(st.slice(i));
            }
        }
        TwoScaleField::new(grid, first.spec(), first.torus_dims(), values)
    }
}
