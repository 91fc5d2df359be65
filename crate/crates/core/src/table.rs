//! The per-modulus KL table: `τ_q`, the left-tail bound at `θ = τ_q` and
//! the Wilks χ² percentile, one row per census.

use crate::bound::{left_tail_bound, BoundInput, BoundResult, BoundVariant};
use crate::census::ResidueCensus;
use crate::chisq::wilks_percentile;
use crate::entropy::{tau_q, TauNormalization};
use crate::exec::{map_slice, Execution};
use crate::format::{percent, scientific, Notation};

/// How the table is computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableOptions {
    pub normalization: TauNormalization,
    pub variant: BoundVariant,
}

impl Default for TableOptions {
    fn default() -> Self {
        TableOptions { normalization: TauNormalization::InvertiblePrimes, variant: BoundVariant::TABLE }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlRow {
    pub q: u64,
    pub x: u64,
    /// Multinomial trials: primes in invertible classes.
    pub n: u64,
    pub k: u64,
    pub tau: Result<f64, String>,
    pub bound: Result<BoundResult, String>,
    pub chi_square: Result<f64, String>,
}

fn row(census: &ResidueCensus, options: &TableOptions) -> KlRow {
    let n = census.invertible_total();
    let k = census.classes() as u64;
    let tau = tau_q(census, options.normalization).map_err(|e| e.to_string());
    let (bound, chi_square) = match &tau {
        Ok(t) => (
            BoundInput::new(n, k, *t)
                .and_then(|input| left_tail_bound(&input, options.variant, Execution::Sequential))
                .map_err(|e| e.to_string()),
            wilks_percentile(n, k, t.max(0.0)).map_err(|e| e.to_string()),
        ),
        Err(e) => (Err(e.clone()), Err(e.clone())),
    };
    KlRow { q: census.q(), x: census.x(), n, k, tau, bound, chi_square }
}

/// One row per census, in input order.
pub fn kl_table(censuses: &[ResidueCensus], options: &TableOptions, exec: Execution) -> Vec<KlRow> {
    map_slice(exec, censuses, |c| row(c, options))
}

struct Cells {
    q: String,
    tau: String,
    bound: String,
    chi: String,
    note: String,
}

fn cells(r: &KlRow, precision: usize, notation: Notation) -> Cells {
    let mut notes = Vec::new();
    let tau = match &r.tau {
        Ok(t) => scientific(*t, precision, notation),
        Err(e) => {
            notes.push(e.clone());
            "n/a".into()
        }
    };
    let bound = match &r.bound {
        Ok(b) => {
            if b.is_vacuous() {
                notes.push("vacuous".into());
            }
            let p = percent(b.bound, precision, notation);
            match notation {
                Notation::Text => format!("≤ {p}"),
                Notation::Csv => p,
            }
        }
        Err(e) => {
            if r.tau.is_ok() {
                notes.push(e.clone());
            }
            "n/a".into()
        }
    };
    let chi = match &r.chi_square {
        Ok(c) => percent(*c, precision, notation),
        Err(e) => {
            if r.tau.is_ok() {
                notes.push(e.clone());
            }
            "n/a".into()
        }
    };
    Cells { q: r.q.to_string(), tau, bound, chi, note: notes.join("; ") }
}

pub const CSV_HEADER: &str = "q,tau,bound_percent,chi_square_percent,note";

pub fn render_csv(rows: &[KlRow], precision: usize) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let c = cells(r, precision, Notation::Csv);
        let note = if c.note.contains([',', '"']) { format!("\"{}\"", c.note.replace('"', "\"\"")) } else { c.note };
        out.push_str(&format!("{},{},{},{},{}\n", c.q, c.tau, c.bound, c.chi, note));
    }
    out
}

pub fn render_text(rows: &[KlRow], precision: usize) -> String {
    let header = ["q", "tau_q", "bound", "chi-square", ""];
    let body: Vec<Cells> = rows.iter().map(|r| cells(r, precision, Notation::Text)).collect();
    let width = |f: &dyn Fn(&Cells) -> &str, h: &str| {
        body.iter().map(|c| f(c).chars().count()).chain([h.chars().count()]).max().unwrap_or(0)
    };
    let w = [
        width(&|c| &c.q, header[0]),
        width(&|c| &c.tau, header[1]),
        width(&|c| &c.bound, header[2]),
        width(&|c| &c.chi, header[3]),
    ];
    let pad = |s: &str, w: usize| format!("{}{s}", " ".repeat(w.saturating_sub(s.chars().count())));
    let line = |q: &str, t: &str, b: &str, c: &str, n: &str| {
        let mut l = format!("{}  {}  {}  {}", pad(q, w[0]), pad(t, w[1]), pad(b, w[2]), pad(c, w[3]));
        if !n.is_empty() {
            l.push_str("  ");
            l.push_str(n);
        }
        l.push('\n');
        l
    };
    let mut out = line(header[0], header[1], header[2], header[3], "");
    for c in &body {
        out.push_str(&line(&c.q, &c.tau, &c.bound, &c.chi, &c.note));
    }
    out
}
