//! Memoized optimal fraction as a function of `ln q`.
//!
//! The optimal fraction depends on time only through the mispricing, so a
//! table over `s = ln q` replaces the per-step optimization. Nodes sit at
//! `s = i * spacing`, hold the unconstrained maximizer together with its
//! slope (implicit differentiation of the stationarity condition), and are
//! filled lazily the first time a query touches them. Queries use cubic
//! Hermite interpolation; bounds are applied after interpolation, which is
//! exact because the objective is concave.

use crate::error::Result;
use crate::model::ModelParams;

use super::objective::Scenario;
use super::quadrature::JumpMenu;
use super::solver::{maximize_stationary, EcoKelly, LambdaBounds, DEFAULT_TOL};

pub const DEFAULT_SPACING: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableNode {
    pub lambda: f64,
    pub slope: f64,
}

/// Grid description: node spacing and the `ln q` range to pre-fill.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub spacing: f64,
    pub log_q_min: f64,
    pub log_q_max: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            spacing: DEFAULT_SPACING,
            log_q_min: -1.0,
            log_q_max: 1.0,
        }
    }
}

/// Lazily grown table of the unconstrained optimal fraction. Growth needs
/// `&mut self`; share across threads by cloning.
#[derive(Debug, Clone)]
pub struct LambdaTable {
    params: ModelParams,
    engine: EcoKelly,
    spacing: f64,
    tol: f64,
    /// Grid index of `nodes[0]`.
    origin: i64,
    nodes: Vec<Option<TableNode>>,
}

impl LambdaTable {
    pub fn new(params: ModelParams, engine: EcoKelly, spacing: f64) -> Self {
        assert!(spacing > 0.0, "table spacing must be positive");
        LambdaTable {
            params,
            engine,
            spacing,
            tol: DEFAULT_TOL,
            origin: 0,
            nodes: Vec::new(),
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Number of nodes computed so far.
    pub fn filled(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_some()).count()
    }

    /// Computes every node covering `[log_q_min, log_q_max]`.
    pub fn prefill(&mut self, log_q_min: f64, log_q_max: f64) -> Result<()> {
        let lo = (log_q_min / self.spacing).floor() as i64;
        let hi = (log_q_max / self.spacing).ceil() as i64;
        for i in lo..=hi {
            self.node(i)?;
        }
        Ok(())
    }

    /// Node `i`, computing it if needed.
    pub fn node(&mut self, i: i64) -> Result<TableNode> {
        if self.nodes.is_empty() {
            self.origin = i;
            self.nodes.push(None);
        }
        if i < self.origin {
            let grow = (self.origin - i) as usize;
            let mut v = vec![None; grow];
            v.append(&mut self.nodes);
            self.nodes = v;
            self.origin = i;
        }
        let k = (i - self.origin) as usize;
        if k >= self.nodes.len() {
            self.nodes.resize(k + 1, None);
        }
        if let Some(n) = self.nodes[k] {
            return Ok(n);
        }
        let node = self.solve(i as f64 * self.spacing)?;
        self.nodes[k] = Some(node);
        Ok(node)
    }

    /// Every solve starts from zero, so a node's value does not depend on
    /// the order in which the table was filled.
    fn solve(&self, log_q: f64) -> Result<TableNode> {
        let scenario = Scenario::new(&self.params, log_q, &self.engine.menu, &self.engine.rule)?;
        let lambda = maximize_stationary(&scenario, LambdaBounds::unbounded(), self.tol, 0.0)?;
        let (g, h) = scenario.derivatives(lambda);
        // At a search limit the maximizer is pinned and does not move with q.
        let interior = h < 0.0 && g.abs() <= 1e-9 * (h.abs() * lambda.abs().max(1.0));
        let slope = if interior {
            -scenario.cross_derivative(lambda) / h
        } else {
            0.0
        };
        Ok(TableNode { lambda, slope })
    }

    /// Interpolated unconstrained maximizer at `ln q`.
    pub fn unconstrained(&mut self, log_q: f64) -> Result<f64> {
        let x = log_q / self.spacing;
        let i = x.floor();
        let t = x - i;
        let i = i as i64;
        let n0 = self.node(i)?;
        if t == 0.0 {
            return Ok(n0.lambda);
        }
        let n1 = self.node(i + 1)?;
        let h = self.spacing;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Ok(h00 * n0.lambda + h10 * h * n0.slope + h01 * n1.lambda + h11 * h * n1.slope)
    }

    /// Interpolated optimal fraction at mispricing `q` within `bounds`.
    pub fn lambda(&mut self, q: f64, bounds: LambdaBounds) -> Result<f64> {
        Ok(bounds.clip(self.unconstrained(q.ln())?))
    }
}

/// A table for `params` with the given menu and 21 Gaussian nodes, pre-filled
/// over `grid`. Queries outside the grid extend it.
pub fn build_lambda_interpolant(
    params: &ModelParams,
    menu: &JumpMenu,
    grid: GridSpec,
) -> Result<LambdaTable> {
    let mut engine = EcoKelly::with_defaults(params)?;
    engine.menu = menu.clone();
    let mut table = LambdaTable::new(*params, engine, grid.spacing);
    table.prefill(grid.log_q_min, grid.log_q_max)?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kelly::quadrature::discretize_jump_distribution;

    fn table() -> (ModelParams, EcoKelly, LambdaTable) {
        let p = ModelParams::base();
        let eco = EcoKelly::with_defaults(&p).unwrap();
        let t = build_lambda_interpolant(
            &p,
            &eco.menu,
            GridSpec {
                log_q_min: -0.2,
                log_q_max: 0.2,
                ..Default::default()
            },
        )
        .unwrap();
        (p, eco, t)
    }

    #[test]
    fn node_queries_are_exact() {
        let (p, eco, mut t) = table();
        let exact = eco
            .optimal_lambda(&p, 1.0, LambdaBounds::unbounded(), 1e-12)
            .unwrap();
        let v = t.unconstrained(0.0).unwrap();
        assert_eq!(v, t.node(0).unwrap().lambda);
        assert!((v - exact).abs() < 1e-9);
    }

    #[test]
    fn grows_on_demand() {
        let (p, eco, mut t) = table();
        let before = t.filled();
        let q = 3.0f64;
        let v = t.lambda(q, LambdaBounds::unbounded()).unwrap();
        assert!(t.filled() > before);
        let exact = eco
            .optimal_lambda(&p, q, LambdaBounds::unbounded(), 1e-12)
            .unwrap();
        assert!((v - exact).abs() < 1e-5, "{v} vs {exact}");
    }

    #[test]
    fn bounds_clip_after_interpolation() {
        let (p, eco, mut t) = table();
        let menu = discretize_jump_distribution(p.k_bar, p.sigma_kappa, 7).unwrap();
        assert_eq!(menu, eco.menu);
        let v = t.lambda(1.0, LambdaBounds::leveraged()).unwrap();
        assert_eq!(v, 2.0);
    }
}
