//! DC operating point and DC sweep by modified nodal analysis.
//!
//! Unknowns are the non-ground node voltages followed by one branch current
//! per voltage source. The branch current flows from the `+` node through
//! the source to the `-` node, so a source delivering power reports a
//! negative current. MOSFETs are linearized each Newton iteration; a
//! circuit without MOSFETs is solved by a single exact linear solve.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::SimError;
use crate::flatten::{FlatCircuit, NodeId};
use crate::linalg::{self, Matrix};
use crate::mosfet::{mosfet_eval, Region, DEFAULT_LENGTH, DEFAULT_WIDTH};
use crate::netlist::{ElementKind, ModelCard, Polarity};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Absolute KCL residual tolerance, amperes.
    pub abstol: f64,
    pub reltol: f64,
    pub max_iter: usize,
    /// Conductance across every MOSFET channel, siemens.
    pub gmin: f64,
    /// Largest per-node Newton update, volts.
    pub damping: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            abstol: 1e-9,
            reltol: 1e-6,
            max_iter: 200,
            gmin: 1e-12,
            damping: 0.5,
        }
    }
}

/// Absolute floor of the voltage-update convergence test.
const VNTOL: f64 = 1e-6;
const SOURCE_STEPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Plain,
    GminStep,
    SourceStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DCSolution {
    pub node_voltages: BTreeMap<String, f64>,
    pub source_currents: BTreeMap<String, f64>,
    pub iterations: usize,
    pub residual_norm: f64,
    pub converged: bool,
    pub strategy: Strategy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnosis: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub regions: BTreeMap<String, Region>,
    /// Raw unknown vector, reused as the starting point of sweep steps.
    #[serde(skip)]
    state: Vec<f64>,
}

impl DCSolution {
    pub fn voltage(&self, node: &str) -> Option<f64> {
        self.node_voltages.get(&node.to_ascii_lowercase()).copied()
    }

    pub fn current(&self, source: &str) -> Option<f64> {
        self.source_currents
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(source))
            .map(|(_, v)| *v)
    }

    pub fn region(&self, device: &str) -> Option<Region> {
        self.regions
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(device))
            .map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub solution: DCSolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub swept_source: String,
    pub points: Vec<SweepPoint>,
    pub failures: Vec<usize>,
}

impl SweepResult {
    /// Voltages of `node` at every point, `None` where the point failed.
    pub fn trace(&self, node: &str) -> Vec<Option<f64>> {
        self.points
            .iter()
            .map(|p| {
                if p.solution.converged {
                    p.solution.voltage(node)
                } else {
                    None
                }
            })
            .collect()
    }

    /// CSV with the swept value first, then one column per node.
    pub fn to_csv(&self) -> String {
        let nodes: Vec<&String> = self
            .points
            .first()
            .map(|p| p.solution.node_voltages.keys().filter(|n| *n != "0").collect())
            .unwrap_or_default();
        let mut out = String::new();
        out.push_str(&self.swept_source);
        for n in &nodes {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for p in &self.points {
            let _ = write!(out, "{:e}", p.value);
            for n in &nodes {
                out.push(',');
                if p.solution.converged {
                    let _ = write!(out, "{:e}", p.solution.node_voltages[*n]);
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
enum Stamp {
    Conductance {
        a: NodeId,
        b: NodeId,
        g: f64,
    },
    VSource {
        p: NodeId,
        n: NodeId,
        branch: usize,
        value: f64,
    },
    ISource {
        device: usize,
        p: NodeId,
        n: NodeId,
        value: f64,
    },
    Mos {
        device: usize,
        d: NodeId,
        g: NodeId,
        s: NodeId,
        model: ModelCard,
        w: f64,
        l: f64,
    },
}

/// A flat circuit checked and reduced to MNA stamps.
struct Mna<'a> {
    flat: &'a FlatCircuit,
    stamps: Vec<Stamp>,
    vsources: Vec<usize>,
    n_nodes: usize,
    nonlinear: bool,
}

#[derive(Debug)]
struct Newton {
    x: Vec<f64>,
    iterations: usize,
    converged: bool,
    residual: f64,
    diagnosis: Option<String>,
}

impl<'a> Mna<'a> {
    fn compile(flat: &'a FlatCircuit) -> Result<Self, SimError> {
        if !flat.has_ground() {
            return Err(SimError::NoGround);
        }
        let mut stamps = Vec::new();
        let mut vsources = Vec::new();
        for (idx, d) in flat.devices.iter().enumerate() {
            let expected = d.kind.terminal_count().unwrap_or(0);
            if d.kind == ElementKind::SubcktInstance || d.nodes.len() != expected {
                return Err(SimError::BadArity {
                    device: d.name.clone(),
                    expected,
                    found: d.nodes.len(),
                });
            }
            let value = || {
                d.value.ok_or_else(|| SimError::MissingValue {
                    device: d.name.clone(),
                })
            };
            match d.kind {
                ElementKind::Resistor => {
                    let r = value()?;
                    if r == 0.0 || !r.is_finite() {
                        return Err(SimError::MissingValue {
                            device: d.name.clone(),
                        });
                    }
                    stamps.push(Stamp::Conductance {
                        a: d.nodes[0],
                        b: d.nodes[1],
                        g: 1.0 / r,
                    });
                }
                ElementKind::Capacitor => {}
                ElementKind::VSource => {
                    stamps.push(Stamp::VSource {
                        p: d.nodes[0],
                        n: d.nodes[1],
                        branch: vsources.len(),
                        value: value()?,
                    });
                    vsources.push(idx);
                }
                ElementKind::ISource => stamps.push(Stamp::ISource {
                    device: idx,
                    p: d.nodes[0],
                    n: d.nodes[1],
                    value: value()?,
                }),
                ElementKind::Mosfet => {
                    let model = flat.model_for(d).cloned().ok_or_else(|| SimError::UnknownModel {
                        device: d.name.clone(),
                        model: d.model.clone().unwrap_or_default(),
                    })?;
                    stamps.push(Stamp::Mos {
                        device: idx,
                        d: d.nodes[0],
                        g: d.nodes[1],
                        s: d.nodes[2],
                        model,
                        w: d.params.get("w").copied().unwrap_or(DEFAULT_WIDTH),
                        l: d.params.get("l").copied().unwrap_or(DEFAULT_LENGTH),
                    });
                }
                ElementKind::SubcktInstance => unreachable!(),
            }
        }
        let nonlinear = stamps.iter().any(|s| matches!(s, Stamp::Mos { .. }));
        Ok(Mna {
            flat,
            stamps,
            vsources,
            n_nodes: flat.node_count(),
            nonlinear,
        })
    }

    fn dim(&self) -> usize {
        self.n_nodes - 1 + self.vsources.len()
    }

    fn branch_row(&self, branch: usize) -> usize {
        self.n_nodes - 1 + branch
    }

    #[inline]
    fn v(x: &[f64], node: NodeId) -> f64 {
        if node == 0 {
            0.0
        } else {
            x[node - 1]
        }
    }

    fn source_value(&self, stamp_value: f64, device: usize, overrides: &[(usize, f64)]) -> f64 {
        overrides
            .iter()
            .find(|(d, _)| *d == device)
            .map_or(stamp_value, |(_, v)| *v)
    }

    /// Assemble the residual (currents leaving each node, then branch
    /// voltage equations) and, when requested, its Jacobian.
    fn assemble(
        &self,
        x: &[f64],
        scale: f64,
        shunt: f64,
        gmin: f64,
        overrides: &[(usize, f64)],
        mut jac: Option<&mut Matrix>,
    ) -> Vec<f64> {
        let mut f = vec![0.0; self.dim()];
        let row = |node: NodeId| if node == 0 { None } else { Some(node - 1) };
        macro_rules! jadd {
            ($r:expr, $c:expr, $v:expr) => {
                if let (Some(r), Some(c)) = ($r, $c) {
                    if let Some(j) = jac.as_deref_mut() {
                        j.add(r, c, $v);
                    }
                }
            };
        }
        let conductance = |f: &mut Vec<f64>, jac: &mut Option<&mut Matrix>, a: NodeId, b: NodeId, g: f64| {
            let i = g * (Self::v(x, a) - Self::v(x, b));
            if let Some(r) = row(a) {
                f[r] += i;
            }
            if let Some(r) = row(b) {
                f[r] -= i;
            }
            if let Some(j) = jac.as_deref_mut() {
                for (p, q, s) in [(a, a, g), (a, b, -g), (b, a, -g), (b, b, g)] {
                    if let (Some(r), Some(c)) = (row(p), row(q)) {
                        j.add(r, c, s);
                    }
                }
            }
        };

        for stamp in &self.stamps {
            match *stamp {
                Stamp::Conductance { a, b, g } => conductance(&mut f, &mut jac, a, b, g),
                Stamp::VSource { p, n, branch, value } => {
                    let value = self.source_value(value, self.vsources[branch], overrides);
                    let br = self.branch_row(branch);
                    let i = x[br];
                    if let Some(r) = row(p) {
                        f[r] += i;
                    }
                    if let Some(r) = row(n) {
                        f[r] -= i;
                    }
                    f[br] = Self::v(x, p) - Self::v(x, n) - scale * value;
                    jadd!(row(p), Some(br), 1.0);
                    jadd!(row(n), Some(br), -1.0);
                    jadd!(Some(br), row(p), 1.0);
                    jadd!(Some(br), row(n), -1.0);
                }
                Stamp::ISource { device, p, n, value } => {
                    let value = scale * self.source_value(value, device, overrides);
                    if let Some(r) = row(p) {
                        f[r] += value;
                    }
                    if let Some(r) = row(n) {
                        f[r] -= value;
                    }
                }
                Stamp::Mos {
                    d,
                    g,
                    s,
                    ref model,
                    w,
                    l,
                    ..
                } => {
                    let (vd, vg, vs) = (Self::v(x, d), Self::v(x, g), Self::v(x, s));
                    let (sign, e) = match model.polarity {
                        Polarity::Nmos => (1.0, mosfet_eval(model, w, l, vg - vs, vd - vs)),
                        Polarity::Pmos => (-1.0, mosfet_eval(model, w, l, vs - vg, vs - vd)),
                    };
                    let i = sign * e.id;
                    if let Some(r) = row(d) {
                        f[r] += i;
                    }
                    if let Some(r) = row(s) {
                        f[r] -= i;
                    }
                    let partials = [(d, e.gds), (g, e.gm), (s, -e.gm - e.gds)];
                    for (node, dv) in partials {
                        jadd!(row(d), row(node), dv);
                        jadd!(row(s), row(node), -dv);
                    }
                    conductance(&mut f, &mut jac, d, s, gmin);
                }
            }
        }
        if shunt > 0.0 {
            for node in 1..self.n_nodes {
                conductance(&mut f, &mut jac, node, 0, shunt);
            }
        }
        f
    }

    fn kcl_norm(&self, f: &[f64]) -> f64 {
        f[..self.n_nodes - 1]
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    fn branch_norm(&self, f: &[f64]) -> f64 {
        f[self.n_nodes - 1..]
            .iter()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    fn unknown_name(&self, k: usize) -> String {
        if k < self.n_nodes - 1 {
            format!("node {}", self.flat.node_name(k + 1))
        } else {
            let dev = &self.flat.devices[self.vsources[k - (self.n_nodes - 1)]];
            format!("branch current of {}", dev.name)
        }
    }

    fn newton(
        &self,
        mut x: Vec<f64>,
        scale: f64,
        shunt: f64,
        overrides: &[(usize, f64)],
        opts: &SolverOptions,
    ) -> Newton {
        let n = self.dim();
        let node_rows = self.n_nodes - 1;
        for it in 1..=opts.max_iter.max(1) {
            let mut jac = Matrix::zeros(n);
            let f = self.assemble(&x, scale, shunt, opts.gmin, overrides, Some(&mut jac));
            let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
            let mut dx = match linalg::solve(&jac, &rhs) {
                Ok(dx) => dx,
                Err(k) => {
                    return Newton {
                        residual: self.kcl_norm(&f),
                        x,
                        iterations: it,
                        converged: false,
                        diagnosis: Some(format!(
                            "singular MNA matrix: {} is undetermined (floating island or source loop?)",
                            self.unknown_name(k)
                        )),
                    }
                }
            };
            let mut clamped = false;
            if self.nonlinear {
                for d in dx[..node_rows].iter_mut() {
                    if d.abs() > opts.damping {
                        *d = opts.damping.copysign(*d);
                        clamped = true;
                    }
                }
            }
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
            if dx.iter().any(|v| !v.is_finite()) {
                return Newton {
                    x,
                    iterations: it,
                    converged: false,
                    residual: f64::INFINITY,
                    diagnosis: Some("Newton update is not finite".into()),
                };
            }

            let small_step = !clamped
                && dx.iter().zip(&x).enumerate().all(|(k, (d, v))| {
                    let floor = if k < node_rows { VNTOL } else { opts.abstol };
                    d.abs() <= opts.reltol * v.abs() + floor
                });
            if !self.nonlinear || small_step {
                let f = self.assemble(&x, scale, shunt, opts.gmin, overrides, None);
                let residual = self.kcl_norm(&f);
                let ok = residual <= opts.abstol && self.branch_norm(&f) <= VNTOL;
                if ok || !self.nonlinear {
                    return Newton {
                        x,
                        iterations: it,
                        converged: ok,
                        residual,
                        diagnosis: (!ok).then(|| format!("residual {residual:e} A after linear solve")),
                    };
                }
            }
        }
        let f = self.assemble(&x, scale, shunt, opts.gmin, overrides, None);
        Newton {
            residual: self.kcl_norm(&f),
            x,
            iterations: opts.max_iter,
            converged: false,
            diagnosis: Some(format!("no convergence within {} iterations", opts.max_iter)),
        }
    }

    /// Node voltages start at 0 except nodes pinned by voltage sources,
    /// which are propagated outward from ground.
    fn initial_guess(&self, overrides: &[(usize, f64)]) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        let mut known = vec![false; self.n_nodes];
        known[0] = true;
        loop {
            let mut progress = false;
            for stamp in &self.stamps {
                if let Stamp::VSource { p, n, branch, value } = *stamp {
                    let value = self.source_value(value, self.vsources[branch], overrides);
                    if known[n] && !known[p] {
                        let vn = Self::v(&x, n);
                        x[p - 1] = vn + value;
                        known[p] = true;
                        progress = true;
                    } else if known[p] && !known[n] {
                        let vp = Self::v(&x, p);
                        x[n - 1] = vp - value;
                        known[n] = true;
                        progress = true;
                    }
                }
            }
            if !progress {
                break;
            }
        }
        x
    }

    fn solve(
        &self,
        start: Option<&[f64]>,
        overrides: &[(usize, f64)],
        opts: &SolverOptions,
    ) -> DCSolution {
        let guess = match start {
            Some(s) if s.len() == self.dim() => s.to_vec(),
            _ => self.initial_guess(overrides),
        };
        let mut total = 0;

        let plain = self.newton(guess.clone(), 1.0, 0.0, overrides, opts);
        total += plain.iterations;
        if plain.converged || !self.nonlinear {
            return self.finish(plain, Strategy::Plain, total);
        }
        let mut last = plain;

        // gmin stepping: heavy shunts first, relaxed by decades.
        let mut x = guess;
        let mut ok = true;
        let mut g = 1e-3;
        while g >= opts.gmin * 0.999 {
            let r = self.newton(x.clone(), 1.0, g, overrides, opts);
            total += r.iterations;
            if !r.converged {
                ok = false;
                last = r;
                break;
            }
            x = r.x;
            g /= 10.0;
        }
        if ok {
            let r = self.newton(x, 1.0, 0.0, overrides, opts);
            total += r.iterations;
            if r.converged {
                return self.finish(r, Strategy::GminStep, total);
            }
            last = r;
        }

        // Source stepping from a cold start.
        let mut x = vec![0.0; self.dim()];
        for step in 1..=SOURCE_STEPS {
            let scale = step as f64 / SOURCE_STEPS as f64;
            let r = self.newton(x, scale, 0.0, overrides, opts);
            total += r.iterations;
            if !r.converged {
                last = r;
                let mut sol = self.finish(last, Strategy::SourceStep, total);
                sol.diagnosis = Some(format!(
                    "plain Newton, gmin stepping and source stepping all failed (source stepping stalled at {:.0}%): {}",
                    scale * 100.0,
                    sol.diagnosis.unwrap_or_default()
                ));
                return sol;
            }
            x = r.x.clone();
            last = r;
        }
        self.finish(last, Strategy::SourceStep, total)
    }

    fn finish(&self, r: Newton, strategy: Strategy, iterations: usize) -> DCSolution {
        let mut node_voltages = BTreeMap::new();
        for (id, name) in self.flat.nodes.iter().enumerate() {
            node_voltages.insert(name.clone(), Self::v(&r.x, id));
        }
        let mut source_currents = BTreeMap::new();
        for (b, &dev) in self.vsources.iter().enumerate() {
            source_currents.insert(self.flat.devices[dev].name.clone(), r.x[self.branch_row(b)]);
        }
        let mut regions = BTreeMap::new();
        for stamp in &self.stamps {
            if let Stamp::Mos {
                device,
                d,
                g,
                s,
                ref model,
                w,
                l,
            } = *stamp
            {
                let (vd, vg, vs) = (Self::v(&r.x, d), Self::v(&r.x, g), Self::v(&r.x, s));
                let e = match model.polarity {
                    Polarity::Nmos => mosfet_eval(model, w, l, vg - vs, vd - vs),
                    Polarity::Pmos => mosfet_eval(model, w, l, vs - vg, vs - vd),
                };
                regions.insert(self.flat.devices[device].name.clone(), e.region);
            }
        }
        DCSolution {
            node_voltages,
            source_currents,
            iterations,
            residual_norm: r.residual,
            converged: r.converged,
            strategy,
            diagnosis: if r.converged { None } else { r.diagnosis },
            regions,
            state: r.x,
        }
    }
}

fn failed_solution(flat: &FlatCircuit, err: &SimError) -> DCSolution {
    DCSolution {
        node_voltages: BTreeMap::new(),
        source_currents: BTreeMap::new(),
        iterations: 0,
        residual_norm: f64::INFINITY,
        converged: false,
        strategy: Strategy::Plain,
        diagnosis: Some(format!("{err} ({} devices)", flat.device_count())),
        regions: BTreeMap::new(),
        state: Vec::new(),
    }
}

/// Solve the DC operating point.
///
/// Structural problems (no ground, unknown model, wrong terminal count) are
/// errors. A singular or non-convergent system is a solution with
/// `converged == false` and a `diagnosis`.
pub fn solve_op(flat: &FlatCircuit, opts: &SolverOptions) -> Result<DCSolution, SimError> {
    let mna = Mna::compile(flat)?;
    Ok(mna.solve(None, &[], opts))
}

/// Step one independent source through `start..=stop`, warm-starting every
/// point from the previous converged solution. Failed points are recorded
/// in `failures` and the sweep continues.
pub fn dc_sweep(
    flat: &FlatCircuit,
    source: &str,
    start: f64,
    stop: f64,
    step: f64,
    opts: &SolverOptions,
) -> Result<SweepResult, SimError> {
    let (device, dev) = flat
        .device(source)
        .filter(|(_, d)| d.kind.is_source())
        .ok_or_else(|| SimError::UnknownSource(source.to_string()))?;
    if step == 0.0 || !step.is_finite() {
        return Err(SimError::StepZero);
    }
    if (stop - start) * step < 0.0 {
        return Err(SimError::StepDirection { step });
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    let mna = match Mna::compile(flat) {
        Ok(m) => m,
        Err(e) => {
            let points = (0..count)
                .map(|i| SweepPoint {
                    value: start + i as f64 * step,
                    solution: failed_solution(flat, &e),
                })
                .collect();
            return Ok(SweepResult {
                swept_source: dev.name.clone(),
                points,
                failures: (0..count).collect(),
            });
        }
    };

    let mut points = Vec::with_capacity(count);
    let mut failures = Vec::new();
    let mut warm: Option<Vec<f64>> = None;
    for i in 0..count {
        let value = start + i as f64 * step;
        let solution = mna.solve(warm.as_deref(), &[(device, value)], opts);
        if solution.converged {
            warm = Some(solution.state.clone());
        } else {
            failures.push(i);
        }
        points.push(SweepPoint { value, solution });
    }
    Ok(SweepResult {
        swept_source: dev.name.clone(),
        points,
        failures,
    })
}

/// Current flowing into each terminal of every device at `sol`, in device
/// order. Sums over the terminals on any node, ground included, vanish at a
/// converged solution.
pub fn terminal_currents(flat: &FlatCircuit, sol: &DCSolution, opts: &SolverOptions) -> Vec<(String, Vec<f64>)> {
    let v = |id: NodeId| sol.node_voltages.get(flat.node_name(id)).copied().unwrap_or(0.0);
    flat.devices
        .iter()
        .map(|d| {
            let currents = match d.kind {
                ElementKind::Resistor => {
                    let i = (v(d.nodes[0]) - v(d.nodes[1])) / d.value.unwrap_or(f64::INFINITY);
                    vec![i, -i]
                }
                ElementKind::VSource => {
                    let i = sol.current(&d.name).unwrap_or(0.0);
                    vec![i, -i]
                }
                ElementKind::ISource => {
                    let i = d.value.unwrap_or(0.0);
                    vec![i, -i]
                }
                ElementKind::Mosfet => match flat.model_for(d) {
                    Some(model) => {
                        let w = d.params.get("w").copied().unwrap_or(DEFAULT_WIDTH);
                        let l = d.params.get("l").copied().unwrap_or(DEFAULT_LENGTH);
                        let (vd, vg, vs) = (v(d.nodes[0]), v(d.nodes[1]), v(d.nodes[2]));
                        let id = match model.polarity {
                            Polarity::Nmos => mosfet_eval(model, w, l, vg - vs, vd - vs).id,
                            Polarity::Pmos => -mosfet_eval(model, w, l, vs - vg, vs - vd).id,
                        } + opts.gmin * (vd - vs);
                        vec![id, 0.0, -id, 0.0]
                    }
                    None => vec![0.0; d.nodes.len()],
                },
                _ => vec![0.0; d.nodes.len()],
            };
            (d.name.clone(), currents)
        })
        .collect()
}
