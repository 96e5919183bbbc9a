//! Check records and reports.

use std::fmt;

use serde::Serialize;

use crate::config::Settings;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sample {
    /// Decided on canonical forms.
    Symbolic,
    /// Worst sampled point.
    Point(Vec<f64>),
    /// Aggregate over this many sampled points.
    Sampled(usize),
    /// The check did not apply.
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Record {
    pub id: String,
    pub anchor: String,
    pub sample: Sample,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Record {
    pub fn new(id: impl Into<String>, anchor: &str, sample: Sample, residual: f64, tol: f64) -> Record {
        let pass = residual.is_finite() && residual <= tol;
        Record { id: id.into(), anchor: anchor.to_string(), sample, residual, tol, pass, note: None }
    }

    /// Record with an explicit verdict (used when the residual alone does not decide).
    pub fn verdict(id: impl Into<String>, anchor: &str, sample: Sample, residual: f64, tol: f64, pass: bool) -> Record {
        Record { id: id.into(), anchor: anchor.to_string(), sample, residual, tol, pass, note: None }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Record {
        let note = note.into();
        if !note.is_empty() {
            self.note = Some(note);
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Header {
    pub seed: u64,
    pub samples: usize,
    pub reduction_samples: usize,
    pub step: f64,
    pub tolerances: crate::config::Tolerances,
    pub conventions: Vec<(String, String)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub header: Header,
    pub records: Vec<Record>,
}

/// Sign and slot conventions in force, printed with every report.
pub fn conventions() -> Vec<(String, String)> {
    [
        ("wedge", "(a^b)(X,Y) = a(X)b(Y) - a(Y)b(X); forms stored by their values on basis tuples"),
        ("interior", "i_X W = W(X, .)"),
        ("coadjoint", "Coad_g = (Ad_g)^-T, coad_xi = -(ad_xi)^T"),
        ("lift-action", "(xi,eta) -> psi(xi)^c + psi(eta)^v reverses the g x g bracket"),
        ("linear-poisson", "{X^,Y^} = -[X,Y]^, {X^, f} = -rho(X)f"),
        ("poisson-sign", "bracket from Omega_A equals the linear Poisson bracket with factor +1"),
        ("lie-poisson", "{y_I, y_J} = -C_IJ^K y_K"),
    ]
    .into_iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect()
}

impl Report {
    pub fn new(settings: &Settings) -> Report {
        Report {
            header: Header {
                seed: settings.seed,
                samples: settings.samples,
                reduction_samples: settings.reduction_samples,
                step: settings.step,
                tolerances: settings.tol.clone(),
                conventions: conventions(),
            },
            records: Vec::new(),
        }
    }

    pub fn extend(&mut self, rs: impl IntoIterator<Item = Record>) {
        self.records.extend(rs);
    }

    pub fn push(&mut self, r: Record) {
        self.records.push(r);
    }

    pub fn all_pass(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(|r| !r.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn fmt_sample(s: &Sample) -> String {
    match s {
        Sample::Symbolic => "symbolic".into(),
        Sample::Point(p) => {
            let parts: Vec<String> = p.iter().map(|v| format!("{v:.4}")).collect();
            format!("at ({})", parts.join(", "))
        }
        Sample::Sampled(n) => format!("{n} samples"),
        Sample::NotApplicable => "n/a".into(),
    }
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<44} residual {:>10.3e} tol {:>8.1e}  {}  [{}]",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.residual,
            self.tol,
            fmt_sample(&self.sample),
            self.anchor
        )?;
        match &self.note {
            Some(n) => write!(f, "  {n}"),
            None => Ok(()),
        }
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = &self.header;
        writeln!(f, "# seed {:#x}, samples {}, reduction samples {}, step {}", h.seed, h.samples, h.reduction_samples, h.step)?;
        for (k, v) in &h.conventions {
            writeln!(f, "# {k}: {v}")?;
        }
        for r in &self.records {
            writeln!(f, "{r}")?;
        }
        let failed = self.records.iter().filter(|r| !r.pass).count();
        write!(f, "# {} checks, {} failed", self.records.len(), failed)
    }
}
