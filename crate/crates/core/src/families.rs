//! Built-in benchmark families: a linearized fuel-cell energy management model
//! and a synthetic multi-item inventory model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Bound, Coordinate, DenseMatrix, MilpInstance, ParameterizedFamily, RowSense};

const GOLDEN: f64 = 1.618_033_988_749_895;

/// Deterministic low-discrepancy offset in `[0, 1)` for index `k`.
fn spread(k: usize) -> f64 {
    ((k + 1) as f64 * GOLDEN).fract()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FuelCellParams {
    pub horizon: usize,
    /// Quadratic fuel coefficient; only the linearized model (0) is supported.
    pub alpha: f64,
    pub beta: f64,
    /// Relative spread of the per-period linear fuel cost.
    pub beta_jitter: f64,
    pub gamma: f64,
    pub tau: f64,
    pub e_min: f64,
    pub e_max: f64,
    pub p_max: f64,
    pub n_sw: f64,
    pub e_init: f64,
    pub z_init: i64,
    pub s_init: i64,
    /// `d_{-T}, ..., d_{-1}`; empty means all zero.
    pub d_past: Vec<i64>,
    /// Load profile of length `horizon`; empty means the default profile.
    pub p_load: Vec<f64>,
}

impl Default for FuelCellParams {
    fn default() -> Self {
        Self {
            horizon: 5,
            alpha: 0.0,
            beta: 1.0,
            beta_jitter: 0.01,
            gamma: 0.5,
            tau: 1.0,
            e_min: 5.8,
            e_max: 10.2,
            p_max: 1.0,
            n_sw: 2.0,
            e_init: 7.7,
            z_init: 0,
            s_init: 0,
            d_past: Vec::new(),
            p_load: Vec::new(),
        }
    }
}

impl FuelCellParams {
    pub fn with_horizon(horizon: usize) -> Self {
        Self { horizon, ..Self::default() }
    }

    fn load(&self) -> Vec<f64> {
        if !self.p_load.is_empty() {
            return self.p_load.clone();
        }
        (0..self.horizon).map(|t| 0.6 + 0.3 * (2.0 * std::f64::consts::PI * t as f64 / 12.0).sin()).collect()
    }
}

/// Column layout of the fuel-cell model.
struct FuelCols {
    t: usize,
}

impl FuelCols {
    fn p(&self, t: usize) -> usize {
        t
    }
    fn e(&self, t: usize) -> usize {
        self.t + t
    }
    fn z(&self, t: usize) -> usize {
        2 * self.t + 1 + t
    }
    fn wp(&self, t: usize) -> usize {
        3 * self.t + 1 + t
    }
    fn wm(&self, t: usize) -> usize {
        4 * self.t + t
    }
    fn d(&self, t: usize) -> usize {
        5 * self.t - 1 + t
    }
    fn s(&self, t: usize) -> usize {
        6 * self.t - 2 + t
    }
    fn n(&self) -> usize {
        7 * self.t - 2
    }
}

/// Builds the fuel-cell MILP with bounds materialized as rows. The varying
/// coordinates are `E_init` and the load profile.
pub fn build_fuel_cell_family(params: &FuelCellParams, radius: f64) -> Result<ParameterizedFamily> {
    let t_len = params.horizon;
    if params.alpha != 0.0 {
        return Err(Error::InvalidFamily(format!("alpha = {} makes the objective quadratic; only alpha = 0 is supported", params.alpha)));
    }
    if t_len < 2 {
        return Err(Error::InvalidFamily(format!("horizon must be at least 2, got {t_len}")));
    }
    let load = params.load();
    if load.len() != t_len {
        return Err(Error::InvalidFamily(format!("p_load has {} entries, horizon is {t_len}", load.len())));
    }
    let d_past = if params.d_past.is_empty() { vec![0; t_len] } else { params.d_past.clone() };
    if d_past.len() != t_len {
        return Err(Error::InvalidFamily(format!("d_past has {} entries, horizon is {t_len}", d_past.len())));
    }

    let cols = FuelCols { t: t_len };
    let n = cols.n();
    let mut c = vec![0.0; n];
    for t in 0..t_len {
        c[cols.p(t)] = params.beta * (1.0 + params.beta_jitter * spread(t));
        c[cols.z(t)] = params.gamma;
    }

    let mut a = DenseMatrix::zeros(0, n);
    let mut b = Vec::new();
    let mut sense = Vec::new();
    let mut push = |entries: &[(usize, f64)], s: RowSense, rhs: f64| {
        let mut row = vec![0.0; n];
        for &(j, v) in entries {
            row[j] += v;
        }
        a.push_row(&row);
        b.push(rhs);
        sense.push(s);
    };

    push(&[(cols.e(0), 1.0)], RowSense::Eq, params.e_init);
    for t in 0..t_len {
        push(&[(cols.e(t + 1), 1.0), (cols.e(t), -1.0), (cols.p(t), -params.tau)], RowSense::Eq, -params.tau * load[t]);
    }
    push(&[(cols.z(0), 1.0)], RowSense::Eq, params.z_init as f64);
    for t in 0..t_len - 1 {
        push(&[(cols.z(t + 1), 1.0), (cols.z(t), -1.0), (cols.wp(t), -1.0), (cols.wm(t), 1.0)], RowSense::Eq, 0.0);
    }
    for t in 0..t_len - 1 {
        push(&[(cols.d(t), 1.0), (cols.wp(t), -1.0), (cols.wm(t), -1.0)], RowSense::Eq, 0.0);
    }
    push(&[(cols.s(0), 1.0)], RowSense::Eq, params.s_init as f64);
    for t in 0..t_len - 1 {
        push(&[(cols.s(t + 1), 1.0), (cols.s(t), -1.0), (cols.d(t), -1.0)], RowSense::Eq, -(d_past[t] as f64));
    }
    for t in 0..t_len {
        push(&[(cols.p(t), 1.0), (cols.z(t), -params.p_max)], RowSense::Le, 0.0);
    }

    let mut bounds = vec![Bound::FREE; n];
    for t in 0..t_len {
        bounds[cols.p(t)] = Bound::new(0.0, params.p_max);
        bounds[cols.e(t + 1)] = Bound::new(params.e_min, params.e_max);
        bounds[cols.z(t)] = Bound::binary();
        bounds[cols.s(t)] = Bound::new(0.0, params.n_sw);
    }
    for t in 0..t_len - 1 {
        bounds[cols.wp(t)] = Bound::binary();
        bounds[cols.wm(t)] = Bound::binary();
        bounds[cols.d(t)] = Bound::binary();
    }
    let integers = (cols.z(0)..cols.s(0)).collect();
    let m = b.len();
    let base = MilpInstance { name: format!("fuel_cell_T{t_len}"), c, a, b, row_sense: sense, integers, bounds }.materialize_bounds();
    debug_assert!(base.m() > m);

    let varying = (0..=t_len).map(|row| Coordinate::Rhs { row }).collect();
    ParameterizedFamily::new(base, varying, radius)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InventoryParams {
    pub items: usize,
    pub periods: usize,
    /// Per-(item, period) demand, item-major; empty means the default pattern.
    pub demand: Vec<f64>,
    pub base_demand: f64,
    /// Starting stock per item; empty means all zero.
    pub initial_stock: Vec<f64>,
    /// Largest order of one item in one period (also the setup big-M).
    pub order_cap: f64,
    pub period_capacity: f64,
    pub storage_capacity: f64,
    pub unit_cost: f64,
    pub holding_cost: f64,
    pub setup_cost: f64,
    /// Relative spread applied to every cost so optima are unique.
    pub cost_jitter: f64,
}

impl Default for InventoryParams {
    fn default() -> Self {
        Self {
            items: 3,
            periods: 4,
            demand: Vec::new(),
            base_demand: 2.0,
            initial_stock: Vec::new(),
            order_cap: 8.0,
            period_capacity: 12.0,
            storage_capacity: 12.0,
            unit_cost: 1.0,
            holding_cost: 0.3,
            setup_cost: 3.0,
            cost_jitter: 0.05,
        }
    }
}

/// Builds the inventory MILP (orders, stock, setup binaries; flow balance,
/// setup linking, per-period order capacity and storage capacity), bounds
/// materialized as rows. The varying coordinates are the balance right-hand
/// sides, i.e. the demands.
pub fn build_inventory_family(params: &InventoryParams, radius: f64) -> Result<ParameterizedFamily> {
    let (ni, nt) = (params.items, params.periods);
    if ni == 0 || nt == 0 {
        return Err(Error::InvalidFamily(format!("items and periods must be at least 1, got {ni} x {nt}")));
    }
    let k = ni * nt;
    let demand = if params.demand.is_empty() {
        (0..k).map(|idx| params.base_demand * (0.7 + 0.6 * spread(idx))).collect()
    } else {
        params.demand.clone()
    };
    if demand.len() != k {
        return Err(Error::InvalidFamily(format!("demand has {} entries, expected {k}", demand.len())));
    }
    let stock = if params.initial_stock.is_empty() { vec![0.0; ni] } else { params.initial_stock.clone() };
    if stock.len() != ni {
        return Err(Error::InvalidFamily(format!("initial_stock has {} entries, expected {ni}", stock.len())));
    }

    let q = |i: usize, t: usize| i * nt + t;
    let h = |i: usize, t: usize| k + i * nt + t;
    let y = |i: usize, t: usize| 2 * k + i * nt + t;
    let n = 3 * k;
    let jit = |idx: usize, salt: usize| 1.0 + params.cost_jitter * spread(idx * 3 + salt);
    let mut c = vec![0.0; n];
    for i in 0..ni {
        for t in 0..nt {
            let idx = i * nt + t;
            c[q(i, t)] = params.unit_cost * jit(idx, 0);
            c[h(i, t)] = params.holding_cost * jit(idx, 1);
            c[y(i, t)] = params.setup_cost * jit(idx, 2);
        }
    }

    let mut a = DenseMatrix::zeros(0, n);
    let mut b = Vec::new();
    let mut sense = Vec::new();
    let mut push = |entries: &[(usize, f64)], s: RowSense, rhs: f64| {
        let mut row = vec![0.0; n];
        for &(j, v) in entries {
            row[j] += v;
        }
        a.push_row(&row);
        b.push(rhs);
        sense.push(s);
    };
    for i in 0..ni {
        for t in 0..nt {
            let dem = demand[i * nt + t];
            if t == 0 {
                push(&[(h(i, 0), 1.0), (q(i, 0), -1.0)], RowSense::Eq, stock[i] - dem);
            } else {
                push(&[(h(i, t), 1.0), (h(i, t - 1), -1.0), (q(i, t), -1.0)], RowSense::Eq, -dem);
            }
        }
    }
    for i in 0..ni {
        for t in 0..nt {
            push(&[(q(i, t), 1.0), (y(i, t), -params.order_cap)], RowSense::Le, 0.0);
        }
    }
    for t in 0..nt {
        let row: Vec<(usize, f64)> = (0..ni).map(|i| (q(i, t), 1.0)).collect();
        push(&row, RowSense::Le, params.period_capacity);
    }
    for t in 0..nt {
        let row: Vec<(usize, f64)> = (0..ni).map(|i| (h(i, t), 1.0)).collect();
        push(&row, RowSense::Le, params.storage_capacity);
    }

    let mut bounds = vec![Bound::new(0.0, params.order_cap); k];
    bounds.extend(vec![Bound::new(0.0, params.storage_capacity); k]);
    bounds.extend(vec![Bound::binary(); k]);
    let base = MilpInstance {
        name: format!("inventory_{ni}x{nt}"),
        c,
        a,
        b,
        row_sense: sense,
        integers: (2 * k..3 * k).collect(),
        bounds,
    }
    .materialize_bounds();
    let varying = (0..k).map(|row| Coordinate::Rhs { row }).collect();
    ParameterizedFamily::new(base, varying, radius)
}
