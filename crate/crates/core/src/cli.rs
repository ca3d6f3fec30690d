//! Command-line driver: property suites, EPR correlations, evolution runs
//! and the Fock commutator report.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::epr::{correlation, correlation_at, CorrelationRow, Singlet};
use crate::error::{Error, Result};
use crate::fock_kg::TruncatedFock;
use crate::lattice::{Lattice3D, SiteIndex};
use crate::layers::Layer;
use crate::multilayer::{MultiIndex, MultiLayerState, Sector, Symmetry};
use crate::onebody::{OneParticleField, ParticleSpec};
use crate::operators::{HamiltonianSpec, OperatorRep, Propagator, Scheme};
use crate::verify;

/// Largest allowed `|E(a, b) + cos θ|` before `epr` reports failure.
pub const EPR_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(name = "layerfield", version, about = "Multi-layered field experiments and property checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a named property suite, or `all`.
    Verify {
        #[arg(long)]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Singlet spin correlations.
    Epr {
        /// Comma-separated angles in radians between Alice's z axis and Bob's axis in the x-z plane.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, conflicts_with = "axes", required_unless_present = "axes")]
        thetas: Vec<f64>,
        /// File with one axis pair per line: `ax ay az bx by bz`.
        #[arg(long)]
        axes: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Time evolution driven by a TOML experiment config.
    Evolve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Commutator report for a truncated Fock space.
    FockCcr {
        #[arg(long)]
        modes: usize,
        #[arg(long, default_value_t = crate::fock_kg::DEFAULT_CUTOFF)]
        cutoff: usize,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
}

/// Shortest representation that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

fn emit<T: Serialize>(out: &mut dyn Write, format: Format, header: &[&str], rows: &[(Vec<String>, T)]) -> Result<()> {
    match format {
        Format::Csv => {
            writeln!(out, "{}", header.join(","))?;
            for (fields, _) in rows {
                writeln!(out, "{}", fields.join(","))?;
            }
        }
        Format::Jsonl => {
            for (_, record) in rows {
                writeln!(out, "{}", serde_json::to_string(record).map_err(|e| Error::Io(e.to_string()))?)?;
            }
        }
    }
    Ok(())
}

/// Runs a parsed command. `Ok(false)` means a check failed.
pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<bool> {
    match cli.command {
        Command::Verify { suite, seed, format } => cmd_verify(&suite, seed, format, out),
        Command::Epr { thetas, axes, format } => cmd_epr(&thetas, axes.as_deref(), format, out),
        Command::Evolve { config } => cmd_evolve(&config, out),
        Command::FockCcr { modes, cutoff, format } => cmd_fock_ccr(modes, cutoff, format, out),
    }
}

pub fn cmd_verify(suite: &str, seed: u64, format: Format, out: &mut dyn Write) -> Result<bool> {
    let reports = verify::run(suite, seed)?;
    let mut rows = Vec::new();
    for r in &reports {
        for c in &r.checks {
            #[derive(Serialize)]
            struct Row<'a> {
                suite: &'a str,
                seed: u64,
                #[serde(flatten)]
                check: &'a verify::Check,
            }
            let fields = vec![
                r.suite.clone(),
                format!("\"{}\"", c.name),
                c.cases.to_string(),
                num(c.deviation),
                num(c.tolerance),
                if c.passed { "pass" } else { "fail" }.to_string(),
            ];
            rows.push((fields, Row { suite: &r.suite, seed, check: c }));
        }
    }
    emit(out, format, &["suite", "check", "cases", "deviation", "tolerance", "status"], &rows)?;
    Ok(reports.iter().all(verify::SuiteReport::passed))
}

fn parse_axes(path: &Path) -> Result<Vec<([f64; 3], [f64; 3])>> {
    let text = fs::read_to_string(path)?;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let vals = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        if vals.len() != 6 {
            return Err(Error::Config(format!("{}:{}: expected 6 numbers, got {}", path.display(), lineno + 1, vals.len())));
        }
        pairs.push(([vals[0], vals[1], vals[2]], [vals[3], vals[4], vals[5]]));
    }
    if pairs.is_empty() {
        return Err(Error::Config(format!("{}: no axis pairs", path.display())));
    }
    Ok(pairs)
}

pub fn cmd_epr(thetas: &[f64], axes: Option<&Path>, format: Format, out: &mut dyn Write) -> Result<bool> {
    let singlet = Singlet::new()?;
    let rows: Vec<CorrelationRow> = match axes {
        Some(path) => parse_axes(path)?.into_iter().map(|(a, b)| correlation(&singlet, a, b)).collect::<Result<_>>()?,
        None => {
            if thetas.is_empty() {
                return Err(Error::Config("no angles given".into()));
            }
            thetas.iter().map(|&t| correlation_at(&singlet, t)).collect::<Result<_>>()?
        }
    };
    #[derive(Serialize)]
    struct Row {
        theta: f64,
        e: f64,
        p_pp: f64,
        p_pm: f64,
        p_mp: f64,
        p_mm: f64,
    }
    let table: Vec<_> = rows
        .iter()
        .map(|r| {
            let fields = [r.theta, r.e, r.p_pp, r.p_pm, r.p_mp, r.p_mm].map(num).to_vec();
            (fields, Row { theta: r.theta, e: r.e, p_pp: r.p_pp, p_pm: r.p_pm, p_mp: r.p_mp, p_mm: r.p_mm })
        })
        .collect();
    emit(out, format, &["theta", "E", "P++", "P+-", "P-+", "P--"], &table)?;
    Ok(rows.iter().all(|r| (r.e + r.theta.cos()).abs() <= EPR_TOLERANCE))
}

pub fn cmd_fock_ccr(modes: usize, cutoff: usize, format: Format, out: &mut dyn Write) -> Result<bool> {
    let report = TruncatedFock::ring(modes, cutoff)?.ccr_check()?;
    let fields = vec![
        report.modes.to_string(),
        report.cutoff.to_string(),
        num(report.max_aa),
        num(report.max_adag_adag),
        num(report.max_below_cutoff),
        num(report.max_full_space),
        num(report.boundary_anomaly),
    ];
    let header = ["modes", "cutoff", "max_aa", "max_adag_adag", "max_below_cutoff", "max_full_space", "boundary_anomaly"];
    emit(out, format, &header, &[(fields, &report)])?;
    Ok(report.exact_below_cutoff())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeBlock {
    pub dims: [usize; 3],
    #[serde(default = "unit")]
    pub spacing: f64,
}

fn unit() -> f64 {
    1.0
}

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

fn record_every_default() -> usize {
    1
}

fn yes() -> bool {
    true
}

/// One factor of an initial layer. Gaussian centres, widths and momenta are
/// in site-coordinate units; widths use minimal-image displacements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FactorBlock {
    Gaussian {
        center: [f64; 3],
        width: f64,
        #[serde(default)]
        momentum: [f64; 3],
        #[serde(default)]
        internal: Option<Vec<Complex64>>,
    },
    Delta {
        site: usize,
        #[serde(default)]
        component: usize,
    },
    Values {
        amplitudes: Vec<Complex64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerBlock {
    #[serde(default = "one")]
    pub amplitude: Complex64,
    pub factors: Vec<FactorBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermBlock {
    pub index: Vec<usize>,
    pub value: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialBlock {
    #[serde(default = "symmetry_none")]
    pub symmetry: Symmetry,
    #[serde(default = "yes")]
    pub normalize: bool,
    #[serde(default)]
    pub layers: Vec<LayerBlock>,
    #[serde(default)]
    pub terms: Vec<TermBlock>,
}

fn symmetry_none() -> Symmetry {
    Symmetry::None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionBlock {
    pub dt: f64,
    pub steps: usize,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "record_every_default")]
    pub record_every: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    /// Relative paths resolve against the config file's directory; absent means stdout.
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub lattice: LatticeBlock,
    pub particles: Vec<ParticleSpec>,
    pub initial: InitialBlock,
    #[serde(default = "HamiltonianSpec::free")]
    pub hamiltonian: HamiltonianSpec,
    pub evolution: EvolutionBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn lattice(&self) -> Result<Lattice3D> {
        Lattice3D::new(self.lattice.dims, self.lattice.spacing)
    }

    /// Referential checks that the schema alone cannot express.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let lat = self.lattice()?;
        let n = self.particles.len();
        if n == 0 {
            return bad("particles: at least one particle is required".into());
        }
        for (j, p) in self.particles.iter().enumerate() {
            p.validate().map_err(|e| Error::Config(format!("particles[{j}]: {e}")))?;
        }
        if self.initial.layers.is_empty() && self.initial.terms.is_empty() {
            return bad("initial: give at least one layer or term".into());
        }
        for (i, l) in self.initial.layers.iter().enumerate() {
            if l.factors.len() != n {
                return bad(format!("initial.layers[{i}]: {} factors for {n} particles", l.factors.len()));
            }
            for (j, f) in l.factors.iter().enumerate() {
                let spec = &self.particles[j];
                let here = format!("initial.layers[{i}].factors[{j}]");
                match f {
                    FactorBlock::Gaussian { width, internal, .. } => {
                        if !(width.is_finite() && *width > 0.0) {
                            return bad(format!("{here}: width must be positive"));
                        }
                        if internal.as_ref().is_some_and(|v| v.len() != spec.internal_dim) {
                            return bad(format!("{here}: internal needs {} entries", spec.internal_dim));
                        }
                    }
                    FactorBlock::Delta { site, component } => {
                        if *site >= lat.site_count() || *component >= spec.internal_dim {
                            return bad(format!("{here}: site or component out of range"));
                        }
                    }
                    FactorBlock::Values { amplitudes } => {
                        if amplitudes.len() != spec.dim_on(&lat) {
                            return bad(format!("{here}: expected {} amplitudes, got {}", spec.dim_on(&lat), amplitudes.len()));
                        }
                    }
                }
            }
        }
        for (i, t) in self.initial.terms.iter().enumerate() {
            if t.index.len() != n {
                return bad(format!("initial.terms[{i}]: index has {} entries for {n} particles", t.index.len()));
            }
            for (j, &k) in t.index.iter().enumerate() {
                if k >= self.particles[j].dim_on(&lat) {
                    return bad(format!("initial.terms[{i}]: index {k} out of range for slot {j}"));
                }
            }
        }
        if self.initial.symmetry != Symmetry::None && self.particles.windows(2).any(|w| w[0] != w[1]) {
            return bad("initial.symmetry: exchange symmetry needs identical particles".into());
        }
        for (i, e) in self.hamiltonian.external.iter().enumerate() {
            if e.slot >= n {
                return bad(format!("hamiltonian.external[{i}]: slot {} does not exist", e.slot));
            }
            if e.values.len() != lat.site_count() {
                return bad(format!("hamiltonian.external[{i}]: expected {} values", lat.site_count()));
            }
        }
        if !(self.hamiltonian.hbar.is_finite() && self.hamiltonian.hbar > 0.0) {
            return bad("hamiltonian.hbar must be positive".into());
        }
        let ev = &self.evolution;
        if !(ev.dt.is_finite() && ev.dt > 0.0) {
            return bad("evolution.dt must be positive".into());
        }
        if ev.record_every == 0 {
            return bad("evolution.record_every must be at least 1".into());
        }
        Ok(())
    }

    fn factor(&self, lat: Lattice3D, spec: &ParticleSpec, f: &FactorBlock) -> Result<OneParticleField> {
        match f {
            FactorBlock::Values { amplitudes } => OneParticleField::from_amplitudes(lat, spec.clone(), amplitudes.clone()),
            FactorBlock::Delta { site, component } => OneParticleField::basis(lat, spec.clone(), SiteIndex(*site), *component),
            FactorBlock::Gaussian { center, width, momentum, internal } => {
                let dims = lat.dims();
                let spatial = (0..lat.site_count())
                    .map(|s| {
                        let c = lat.coords(SiteIndex(s))?;
                        let (mut r2, mut phase) = (0.0, 0.0);
                        for a in 0..3 {
                            let n = dims[a] as f64;
                            let d = c[a] as f64 - center[a];
                            let d = d - n * (d / n).round();
                            r2 += d * d;
                            phase += momentum[a] * c[a] as f64;
                        }
                        Ok(Complex64::from_polar((-r2 / (2.0 * width * width)).exp(), phase))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let internal = internal.clone().unwrap_or_else(|| {
                    let mut v = vec![Complex64::new(0.0, 0.0); spec.internal_dim];
                    v[0] = one();
                    v
                });
                OneParticleField::product(lat, spec.clone(), &spatial, &internal)
            }
        }
    }

    /// Initial state in the configured sector.
    pub fn initial_state(&self) -> Result<MultiLayerState> {
        let lat = self.lattice()?;
        let sector = Sector::distinguishable(lat, self.particles.clone())?;
        let terms = self.initial.terms.iter().map(|t| (MultiIndex(t.index.clone()), t.value));
        let mut state = MultiLayerState::from_terms(sector, terms)?;
        for l in &self.initial.layers {
            let fields = l.factors.iter().zip(&self.particles).map(|(f, s)| self.factor(lat, s, f)).collect::<Result<Vec<_>>>()?;
            let layer = Layer::from_fields(fields)?;
            state = MultiLayerState::add(one(), &state, l.amplitude, &MultiLayerState::from_layer(&layer)?)?;
        }
        if self.initial.symmetry != Symmetry::None {
            state = state.symmetrize(self.initial.symmetry)?;
        }
        if self.initial.normalize {
            let n = state.norm();
            if n == 0.0 {
                return Err(Error::Config("initial: state is zero".into()));
            }
            state = state.scaled(Complex64::new(1.0 / n, 0.0));
        }
        Ok(state)
    }
}

/// Observables recorded along an evolution run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolveRecord {
    pub step: usize,
    pub time: f64,
    pub norm: f64,
    pub energy: f64,
    /// Per slot, per site probability density.
    pub density: Vec<Vec<f64>>,
}

/// Runs the configured evolution and returns the recorded observables.
pub fn run_evolution(cfg: &ExperimentConfig) -> Result<Vec<EvolveRecord>> {
    let mut state = cfg.initial_state()?;
    let h = OperatorRep::hamiltonian(&cfg.hamiltonian, state.sector())?;
    let ev = &cfg.evolution;
    let prop = Propagator::new(&h, ev.dt, ev.scheme, cfg.hamiltonian.hbar)?;
    let observe = |step: usize, m: &MultiLayerState| -> Result<EvolveRecord> {
        let norm = m.norm();
        let energy = if norm > 0.0 { h.expectation(m)?.re / (norm * norm) } else { 0.0 };
        let density = (0..m.sector().n_particles()).map(|j| m.slot_density(j)).collect::<Result<_>>()?;
        Ok(EvolveRecord { step, time: step as f64 * ev.dt, norm, energy, density })
    };
    let mut records = vec![observe(0, &state)?];
    for step in 1..=ev.steps {
        state = prop.step(&state)?;
        if step % ev.record_every == 0 || step == ev.steps {
            records.push(observe(step, &state)?);
        }
    }
    Ok(records)
}

fn write_records(records: &[EvolveRecord], format: Format, out: &mut dyn Write) -> Result<()> {
    let mut header = vec!["step".to_string(), "time".into(), "norm".into(), "energy".into()];
    if let Some(first) = records.first() {
        for (j, d) in first.density.iter().enumerate() {
            header.extend((0..d.len()).map(|s| format!("density_{j}_{s}")));
        }
    }
    let rows: Vec<_> = records
        .iter()
        .map(|r| {
            let mut fields = vec![r.step.to_string(), num(r.time), num(r.norm), num(r.energy)];
            fields.extend(r.density.iter().flatten().map(|&x| num(x)));
            (fields, r)
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    emit(out, format, &header, &rows)
}

pub fn cmd_evolve(config: &Path, out: &mut dyn Write) -> Result<bool> {
    let cfg = ExperimentConfig::load(config)?;
    let records = run_evolution(&cfg)?;
    match &cfg.output.path {
        Some(p) => {
            let target = if p.is_relative() { config.parent().unwrap_or(Path::new(".")).join(p) } else { p.clone() };
            let mut buf = Vec::new();
            write_records(&records, cfg.output.format, &mut buf)?;
            fs::write(&target, buf).map_err(|e| Error::Io(format!("{}: {e}", target.display())))?;
        }
        None => write_records(&records, cfg.output.format, out)?,
    }
    Ok(true)
}
