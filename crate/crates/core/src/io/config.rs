//! Flat TOML run configuration.
//!
//! ```toml
//! alpha = 0.4
//! family = "gaussian"
//! ```
//!
//! is a complete document; every other key falls back to its default. Keys
//! that belong to a different data family, or that no run understands, are
//! rejected.

use serde::{Deserialize, Serialize};

use crate::diagnostics::Tolerances;
use crate::grid::DomainKind;
use crate::io::sha256_hex;
use crate::scenarios::{Family, GridSpec, InitialDataSpec};
use crate::stepper::SolverConfig;
use crate::{Error, Result};

pub const DEFAULT_N: usize = 1025;
pub const DEFAULT_RADIUS: f64 = 8.0;
pub const DEFAULT_GAMMA: f64 = 0.05;

/// Everything needed to reproduce one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub solver: SolverConfig,
    pub grid: GridSpec,
    pub data: InitialDataSpec,
    /// Offset γ of the `L^{3/2+γ}` check used by sweeps.
    pub gamma: f64,
}

impl RunConfig {
    pub fn new(alpha: f64, data: InitialDataSpec) -> Self {
        Self {
            solver: SolverConfig {
                alpha,
                ..SolverConfig::default()
            },
            grid: GridSpec {
                kind: DomainKind::WholeSpaceTruncated {
                    radius: DEFAULT_RADIUS,
                },
                n: DEFAULT_N,
            },
            data,
            gamma: DEFAULT_GAMMA,
        }
    }

    /// SHA-256 of the canonical document; covers every dynamics-relevant field.
    pub fn hash(&self) -> String {
        sha256_hex(emit_config(self).as_bytes())
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        self.data.validate()?;
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::invalid("gamma", "must be positive"));
        }
        if self.grid.n < crate::grid::MIN_NODES {
            return Err(Error::invalid(
                "n",
                format!("need at least {} nodes", crate::grid::MIN_NODES),
            ));
        }
        if let DomainKind::WholeSpaceTruncated { radius } = self.grid.kind {
            if !(radius.is_finite() && radius > 0.0) {
                return Err(Error::invalid("radius", "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    alpha: Option<f64>,

    family: Option<String>,
    amplitude: Option<f64>,
    width: Option<f64>,
    height: Option<f64>,
    plateau: Option<f64>,
    cutoff: Option<f64>,
    power: Option<f64>,
    core_height: Option<f64>,

    domain: Option<String>,
    n: Option<usize>,
    radius: Option<f64>,

    dt0: Option<f64>,
    dt_min: Option<f64>,
    dt_max: Option<f64>,
    t_end: Option<f64>,
    picard_max: Option<usize>,
    picard_tol: Option<f64>,
    blowup_threshold: Option<f64>,
    snapshot_stride: Option<usize>,

    delta: Option<f64>,
    r0: Option<f64>,
    gamma: Option<f64>,
    ladder: Option<Vec<f64>>,
    tol_monotone: Option<f64>,
    tol_tail: Option<f64>,
    tol_floor: Option<f64>,
    tol_decay: Option<f64>,
    tol_pointwise: Option<f64>,
    burn_in_fraction: Option<f64>,
    tail_fraction: Option<f64>,
}

fn reject_foreign(doc: &Document, family: &str, allowed: &[&str]) -> Result<()> {
    let present = [
        ("width", doc.width.is_some()),
        ("height", doc.height.is_some()),
        ("plateau", doc.plateau.is_some()),
        ("cutoff", doc.cutoff.is_some()),
        ("power", doc.power.is_some()),
        ("core_height", doc.core_height.is_some()),
    ];
    for (key, set) in present {
        if set && !allowed.contains(&key) {
            return Err(Error::invalid(
                key,
                format!("not a parameter of family `{family}`"),
            ));
        }
    }
    Ok(())
}

/// Parses a TOML document, applies defaults and validates the result.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let doc: Document = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;

    let alpha = doc
        .alpha
        .ok_or_else(|| Error::invalid("alpha", "is required"))?;

    let family_name = doc.family.as_deref().unwrap_or("gaussian");
    let family = match family_name {
        "gaussian" => {
            reject_foreign(&doc, family_name, &["width"])?;
            Family::Gaussian {
                width: doc.width.unwrap_or(1.0),
            }
        }
        "bump" => {
            reject_foreign(&doc, family_name, &["height", "plateau", "cutoff"])?;
            Family::Bump {
                height: doc.height.unwrap_or(1.0),
                plateau: doc.plateau.unwrap_or(0.5),
                cutoff: doc.cutoff.unwrap_or(2.0),
            }
        }
        "power_tail" => {
            reject_foreign(&doc, family_name, &["power", "core_height"])?;
            Family::PowerTail {
                power: doc.power.unwrap_or(4.0),
                core_height: doc.core_height.unwrap_or(1.0),
            }
        }
        "parabola" => {
            reject_foreign(&doc, family_name, &[])?;
            Family::Parabola
        }
        other => {
            return Err(Error::invalid(
                "family",
                format!("unknown family `{other}` (gaussian, bump, power_tail, parabola)"),
            ))
        }
    };
    let data = InitialDataSpec {
        family,
        amplitude: doc.amplitude.unwrap_or(1.0),
    };

    let kind = match doc.domain.as_deref().unwrap_or("free") {
        "free" => DomainKind::WholeSpaceTruncated {
            radius: doc.radius.unwrap_or(DEFAULT_RADIUS),
        },
        "ball" => {
            if let Some(r) = doc.radius {
                if r != 1.0 {
                    return Err(Error::invalid("radius", "the ball domain has radius 1"));
                }
            }
            DomainKind::Ball
        }
        other => {
            return Err(Error::invalid(
                "domain",
                format!("unknown domain `{other}` (free, ball)"),
            ))
        }
    };

    let base = SolverConfig::default();
    let tol = Tolerances::default();
    let solver = SolverConfig {
        alpha,
        dt0: doc.dt0.unwrap_or(base.dt0),
        dt_min: doc.dt_min.unwrap_or(base.dt_min),
        dt_max: doc.dt_max.unwrap_or(base.dt_max),
        t_end: doc.t_end.unwrap_or(base.t_end),
        picard_max: doc.picard_max.unwrap_or(base.picard_max),
        picard_tol: doc.picard_tol.unwrap_or(base.picard_tol),
        blowup_threshold: doc.blowup_threshold.unwrap_or(base.blowup_threshold),
        snapshot_stride: doc.snapshot_stride.unwrap_or(base.snapshot_stride),
        delta: doc.delta.unwrap_or(base.delta),
        r0: doc.r0.unwrap_or(base.r0),
        ladder: doc.ladder.clone().unwrap_or(base.ladder),
        tolerances: Tolerances {
            monotone: doc.tol_monotone.unwrap_or(tol.monotone),
            tail: doc.tol_tail.unwrap_or(tol.tail),
            floor: doc.tol_floor.unwrap_or(tol.floor),
            decay: doc.tol_decay.unwrap_or(tol.decay),
            pointwise: doc.tol_pointwise.unwrap_or(tol.pointwise),
            burn_in_fraction: doc.burn_in_fraction.unwrap_or(tol.burn_in_fraction),
            tail_fraction: doc.tail_fraction.unwrap_or(tol.tail_fraction),
        },
    };

    let cfg = RunConfig {
        solver,
        grid: GridSpec {
            kind,
            n: doc.n.unwrap_or(DEFAULT_N),
        },
        data,
        gamma: doc.gamma.unwrap_or(DEFAULT_GAMMA),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// Writes every field explicitly, so the output is the canonical form of the config.
pub fn emit_config(cfg: &RunConfig) -> String {
    let s = &cfg.solver;
    let t = &s.tolerances;
    let mut doc = Document {
        alpha: Some(s.alpha),
        amplitude: Some(cfg.data.amplitude),
        n: Some(cfg.grid.n),
        dt0: Some(s.dt0),
        dt_min: Some(s.dt_min),
        dt_max: Some(s.dt_max),
        t_end: Some(s.t_end),
        picard_max: Some(s.picard_max),
        picard_tol: Some(s.picard_tol),
        blowup_threshold: Some(s.blowup_threshold),
        snapshot_stride: Some(s.snapshot_stride),
        delta: Some(s.delta),
        r0: Some(s.r0),
        gamma: Some(cfg.gamma),
        ladder: Some(s.ladder.clone()),
        tol_monotone: Some(t.monotone),
        tol_tail: Some(t.tail),
        tol_floor: Some(t.floor),
        tol_decay: Some(t.decay),
        tol_pointwise: Some(t.pointwise),
        burn_in_fraction: Some(t.burn_in_fraction),
        tail_fraction: Some(t.tail_fraction),
        ..Document::default()
    };
    match cfg.data.family {
        Family::Gaussian { width } => {
            doc.family = Some("gaussian".into());
            doc.width = Some(width);
        }
        Family::Bump {
            height,
            plateau,
            cutoff,
        } => {
            doc.family = Some("bump".into());
            doc.height = Some(height);
            doc.plateau = Some(plateau);
            doc.cutoff = Some(cutoff);
        }
        Family::PowerTail { power, core_height } => {
            doc.family = Some("power_tail".into());
            doc.power = Some(power);
            doc.core_height = Some(core_height);
        }
        Family::Parabola => doc.family = Some("parabola".into()),
    }
    match cfg.grid.kind {
        DomainKind::WholeSpaceTruncated { radius } => {
            doc.domain = Some("free".into());
            doc.radius = Some(radius);
        }
        DomainKind::Ball => {
            doc.domain = Some("ball".into());
            doc.radius = Some(1.0);
        }
    }
    toml::to_string(&doc).expect("plain document serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_document_gets_defaults() {
        let cfg = parse_config("alpha = 0.4\nfamily = \"gaussian\"\n").unwrap();
        assert_eq!(cfg.solver.alpha, 0.4);
        assert_eq!(cfg.solver.delta, 0.1);
        assert_eq!(cfg.solver.picard_tol, 1e-10);
        assert_eq!(cfg.solver.blowup_threshold, 1e6);
        assert_eq!(cfg.solver.tolerances, Tolerances::default());
        assert_eq!(cfg.data, InitialDataSpec::gaussian(1.0));
        assert_eq!(cfg.grid.n, DEFAULT_N);
    }

    #[test]
    fn negative_alpha_names_key() {
        match parse_config("alpha = -1.0") {
            Err(Error::InvalidParameter { key, .. }) => assert_eq!(key, "alpha"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = parse_config("alpha = 0.4\nbogus = 1").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn foreign_family_key_is_rejected() {
        match parse_config("alpha = 0.4\nfamily = \"gaussian\"\ncutoff = 2.0") {
            Err(Error::InvalidParameter { key, .. }) => assert_eq!(key, "cutoff"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dt_bounds_violation_names_key() {
        match parse_config("alpha = 0.4\ndt_min = 0.5\ndt_max = 0.1") {
            Err(Error::InvalidParameter { key, .. }) => assert_eq!(key, "dt_min"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_document() {
        assert!(matches!(parse_config("alpha = "), Err(Error::Config(_))));
    }

    #[test]
    fn emit_parse_is_idempotent() {
        let docs = [
            "alpha = 0.4\nfamily = \"gaussian\"",
            "alpha = 1.5\nfamily = \"parabola\"\ndomain = \"ball\"\nt_end = 6.0\ndt0 = 1e-3",
            "alpha = 0.6\nfamily = \"bump\"\nplateau = 0.25\ncutoff = 3.0\nladder = [1.2]",
            "alpha = 0.1\nfamily = \"power_tail\"\npower = 9.0\nradius = 40.0\nn = 4097",
        ];
        for d in docs {
            let cfg = parse_config(d).unwrap();
            let again = parse_config(&emit_config(&cfg)).unwrap();
            assert_eq!(cfg, again);
            assert_eq!(emit_config(&cfg), emit_config(&again));
        }
    }

    #[test]
    fn hash_tracks_dynamics() {
        let a = parse_config("alpha = 0.4").unwrap();
        let b = parse_config("alpha = 0.41").unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash(), parse_config(&emit_config(&a)).unwrap().hash());
    }
}
