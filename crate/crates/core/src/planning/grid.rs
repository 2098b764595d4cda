use crate::error::{invalid, Result};
use crate::model::{ModelSpec, ParamBox};
use serde::{Deserialize, Serialize};

/// Uniform state grid on `[-R, R]^d` (d ∈ {1, 2}) with the origin as a node,
/// plus a finite action grid in lexicographic order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    /// Nodes per axis are `2 m + 1`.
    pub half_nodes: usize,
    pub spacing: f64,
    pub actions: Vec<Vec<f64>>,
}

/// Declarative grid settings. A missing radius falls back to a caller
/// supplied default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default)]
    pub radius: Option<f64>,
    pub spacing: f64,
    #[serde(default = "default_actions")]
    pub actions_per_axis: usize,
}

fn default_actions() -> usize {
    33
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            radius: None,
            spacing: 0.05,
            actions_per_axis: default_actions(),
        }
    }
}

impl Grid {
    /// The radius is rounded up to a whole number of cells.
    pub fn new(
        dim: usize,
        radius: f64,
        spacing: f64,
        action_box: &ParamBox,
        actions_per_axis: usize,
    ) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return invalid("grids support state dimension 1 or 2");
        }
        if !(spacing > 0.0 && radius > 0.0 && radius.is_finite()) {
            return invalid("grid spacing and radius must be positive");
        }
        if actions_per_axis == 0 {
            return invalid("action grid must be nonempty");
        }
        let half_nodes = (radius / spacing - 1e-9).ceil().max(1.0) as usize;
        Ok(Self {
            dim,
            half_nodes,
            spacing,
            actions: action_box.grid(actions_per_axis),
        })
    }

    pub fn for_model(model: &ModelSpec, cfg: &GridConfig, default_radius: f64) -> Result<Self> {
        Self::new(
            model.state_dim(),
            cfg.radius.unwrap_or(default_radius),
            cfg.spacing,
            &model.action_box,
            cfg.actions_per_axis,
        )
    }

    pub fn radius(&self) -> f64 {
        self.half_nodes as f64 * self.spacing
    }

    pub fn axis_len(&self) -> usize {
        2 * self.half_nodes + 1
    }

    pub fn len(&self) -> usize {
        self.axis_len().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn action_dim(&self) -> usize {
        self.actions[0].len()
    }

    pub fn origin(&self) -> usize {
        self.flat(&[self.half_nodes; 2][..self.dim])
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.axis_len() + i)
    }

    /// Per-axis indices of a node, first coordinate slowest.
    pub fn unflat(&self, node: usize) -> [usize; 2] {
        let n = self.axis_len();
        if self.dim == 1 {
            [node, 0]
        } else {
            [node / n, node % n]
        }
    }

    pub fn axis_value(&self, i: usize) -> f64 {
        (i as f64 - self.half_nodes as f64) * self.spacing
    }

    pub fn coords_into(&self, node: usize, out: &mut [f64]) {
        let idx = self.unflat(node);
        for (k, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = self.axis_value(idx[k]);
        }
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        let mut x = vec![0.0; self.dim];
        self.coords_into(node, &mut x);
        x
    }

    /// Nearest node, and whether `x` lay outside the grid box.
    pub fn nearest(&self, x: &[f64]) -> (usize, bool) {
        let n = self.axis_len() as f64;
        let mut clamped = false;
        let mut idx = [0usize; 2];
        for k in 0..self.dim {
            let u = (x[k] + self.radius()) / self.spacing;
            let r = u.round();
            if !(0.0..=n - 1.0).contains(&r) {
                clamped = true;
            }
            idx[k] = r.clamp(0.0, n - 1.0) as usize;
        }
        (self.flat(&idx[..self.dim]), clamped)
    }

    /// Multilinear interpolation weights for `x`. Outside the grid the
    /// boundary cell is extended linearly, so weights may be negative.
    /// Returns the number of entries written.
    #[inline]
    pub fn stencil(&self, x: &[f64], out: &mut [(usize, f64); 4]) -> usize {
        let n = self.axis_len();
        let mut i0 = [0usize; 2];
        let mut f = [0.0; 2];
        for k in 0..self.dim {
            let u = (x[k] + self.radius()) / self.spacing;
            let c = u.floor().clamp(0.0, (n - 2) as f64);
            i0[k] = c as usize;
            f[k] = u - c;
        }
        if self.dim == 1 {
            out[0] = (i0[0], 1.0 - f[0]);
            out[1] = (i0[0] + 1, f[0]);
            2
        } else {
            let base = i0[0] * n + i0[1];
            out[0] = (base, (1.0 - f[0]) * (1.0 - f[1]));
            out[1] = (base + 1, (1.0 - f[0]) * f[1]);
            out[2] = (base + n, f[0] * (1.0 - f[1]));
            out[3] = (base + n + 1, f[0] * f[1]);
            4
        }
    }

    #[inline]
    pub fn interpolate(&self, w: &[f64], x: &[f64]) -> f64 {
        let mut st = [(0usize, 0.0); 4];
        let m = self.stencil(x, &mut st);
        st[..m].iter().map(|(j, c)| c * w[*j]).sum()
    }

    /// Largest slope between adjacent nodes.
    pub fn max_slope(&self, w: &[f64]) -> f64 {
        let n = self.axis_len();
        let mut best: f64 = 0.0;
        for node in 0..self.len() {
            let idx = self.unflat(node);
            for k in 0..self.dim {
                if idx[k] + 1 < n {
                    let next = if self.dim == 1 || k == 1 {
                        node + 1
                    } else {
                        node + n
                    };
                    best = best.max((w[next] - w[node]).abs() / self.spacing);
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn actions() -> ParamBox {
        ParamBox::new(vec![-1.0], vec![1.0]).unwrap()
    }

    #[test]
    fn origin_is_a_node() {
        let g = Grid::new(
            2,
            1.0,
            0.25,
            &ParamBox::new(vec![-1.0, 0.0], vec![1.0, 0.0]).unwrap(),
            3,
        )
        .unwrap();
        assert_eq!(g.axis_len(), 9);
        assert_eq!(g.coords(g.origin()), vec![0.0, 0.0]);
        assert_eq!(g.actions.len(), 3);
        assert_eq!(g.nearest(&[0.1, -0.1]), (g.origin(), false));
        assert!(g.nearest(&[5.0, 0.0]).1);
    }

    #[test]
    fn interpolation_is_exact_for_affine_functions() {
        let g = Grid::new(2, 1.0, 0.5, &actions(), 1).unwrap();
        let w: Vec<f64> = (0..g.len())
            .map(|i| {
                let x = g.coords(i);
                1.0 + 2.0 * x[0] - 3.0 * x[1]
            })
            .collect();
        for x in [[0.3, -0.2], [2.5, 0.1], [-4.0, 3.0]] {
            assert!((g.interpolate(&w, &x) - (1.0 + 2.0 * x[0] - 3.0 * x[1])).abs() < 1e-12);
        }
        assert!((g.max_slope(&w) - 3.0).abs() < 1e-12);
    }
}
