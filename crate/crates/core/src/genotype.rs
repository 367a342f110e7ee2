//! Discrete genotype data: loading, validation, constant-variant filtering,
//! and the flip-minimizing relabeling algorithm.
//!
//! Genotypes are coded 0/1/2 (copies of one allele) with `NA` for missing.
//! A "flip" is an adjacent-position `{0,2}` pattern within one subject's
//! sequence; relabeling recodes whole columns 0<->2 to minimize the total
//! flip count, which removes spurious oscillations before smoothing.

use std::io::BufRead;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Sentinel for a missing genotype code.
pub const MISSING: i8 = -1;

/// Subjects x variants genotype codes with normalized genomic positions.
///
/// Immutable after construction; safe to share read-only across workers.
#[derive(Debug, Clone, PartialEq)]
pub struct GenotypeMatrix {
    codes: Array2<i8>,
    positions: Vec<f64>,
    variant_ids: Vec<String>,
    subject_ids: Vec<String>,
}

impl GenotypeMatrix {
    /// Build a matrix from raw parts. Codes must be in `{0,1,2}` or
    /// [`MISSING`]; raw positions must be strictly increasing and are
    /// min–max normalized to `[0,1]`.
    pub fn from_parts(
        codes: Array2<i8>,
        raw_positions: &[f64],
        variant_ids: Vec<String>,
        subject_ids: Vec<String>,
    ) -> Result<Self> {
        let (n, t) = codes.dim();
        if t == 0 {
            return Err(Error::EmptyRegion("matrix has no variants".into()));
        }
        if n == 0 {
            return Err(Error::Shape("matrix has no subjects".into()));
        }
        if raw_positions.len() != t || variant_ids.len() != t || subject_ids.len() != n {
            return Err(Error::Shape(format!(
                "inconsistent dimensions: {n} subjects x {t} variants, {} positions, {} variant ids, {} subject ids",
                raw_positions.len(),
                variant_ids.len(),
                subject_ids.len()
            )));
        }
        for &c in codes.iter() {
            if !(c == MISSING || (0..=2).contains(&c)) {
                return Err(Error::Parse(format!("genotype code out of range: {c}")));
            }
        }
        let positions = normalize_positions(raw_positions)?;
        Ok(GenotypeMatrix {
            codes,
            positions,
            variant_ids,
            subject_ids,
        })
    }

    pub fn n_subjects(&self) -> usize {
        self.codes.nrows()
    }

    pub fn n_variants(&self) -> usize {
        self.codes.ncols()
    }

    /// Code at (subject, variant), `None` if missing.
    pub fn code(&self, subject: usize, variant: usize) -> Option<u8> {
        let c = self.codes[(subject, variant)];
        (c >= 0).then_some(c as u8)
    }

    pub fn codes(&self) -> &Array2<i8> {
        &self.codes
    }

    /// Normalized positions in `[0,1]`, strictly increasing.
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn variant_ids(&self) -> &[String] {
        &self.variant_ids
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    /// One subject's codes as `(values, observed)` for smoothing; missing
    /// entries carry 0.0 with `observed = false`.
    pub fn row_values(&self, subject: usize) -> (Vec<f64>, Vec<bool>) {
        let row = self.codes.row(subject);
        let mut values = Vec::with_capacity(row.len());
        let mut observed = Vec::with_capacity(row.len());
        for &c in row.iter() {
            if c >= 0 {
                values.push(c as f64);
                observed.push(true);
            } else {
                values.push(0.0);
                observed.push(false);
            }
        }
        (values, observed)
    }

    /// Serialize in the genotype TSV format (normalized positions).
    pub fn write_tsv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        let mut header = String::from("pos");
        for p in &self.positions {
            header.push('\t');
            header.push_str(&format!("{p}"));
        }
        writeln!(w, "{header}")?;
        for (i, id) in self.subject_ids.iter().enumerate() {
            let mut line = id.clone();
            for j in 0..self.n_variants() {
                line.push('\t');
                match self.codes[(i, j)] {
                    MISSING => line.push_str("NA"),
                    c => line.push_str(&format!("{c}")),
                }
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Min–max normalize strictly increasing positions to `[0,1]`.
/// A single position maps to 0.5 (its value never matters downstream).
fn normalize_positions(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(Error::Position("no positions".into()));
    }
    for p in raw {
        if !p.is_finite() {
            return Err(Error::Position(format!("non-finite position: {p}")));
        }
    }
    for w in raw.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Position(format!(
                "positions must be strictly increasing: {} then {}",
                w[0], w[1]
            )));
        }
    }
    if raw.len() == 1 {
        return Ok(vec![0.5]);
    }
    let lo = raw[0];
    let span = raw[raw.len() - 1] - lo;
    Ok(raw.iter().map(|p| ((p - lo) / span).clamp(0.0, 1.0)).collect())
}

/// Load a genotype matrix from tab-separated text.
///
/// Line 1: `pos<TAB>p1<TAB>...<TAB>pT` (raw positions). A bare `pos` header
/// means no coordinates are available; variants then fall back to equal
/// spacing. Data lines: `subject_id<TAB>c1<TAB>...<TAB>cT` with codes
/// 0/1/2/NA.
pub fn load_genotype_matrix<R: BufRead>(reader: R) -> Result<GenotypeMatrix> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Shape("empty genotype file".into()))??;
    let mut fields = header.split('\t');
    match fields.next() {
        Some("pos") => {}
        other => {
            return Err(Error::Parse(format!(
                "genotype header must start with 'pos', got {other:?}"
            )))
        }
    }
    let mut raw_positions = Vec::new();
    for f in fields {
        let p: f64 = f
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad position token: {f:?}")))?;
        raw_positions.push(p);
    }

    let mut subject_ids = Vec::new();
    let mut rows: Vec<Vec<i8>> = Vec::new();
    let mut n_variants = if raw_positions.is_empty() { None } else { Some(raw_positions.len()) };
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let id = fields
            .next()
            .ok_or_else(|| Error::Shape("missing subject id".into()))?;
        let mut row = Vec::new();
        for tok in fields {
            row.push(parse_code(tok.trim())?);
        }
        match n_variants {
            None => n_variants = Some(row.len()),
            Some(t) if t != row.len() => {
                return Err(Error::Shape(format!(
                    "subject {id} has {} codes, expected {t}",
                    row.len()
                )))
            }
            _ => {}
        }
        subject_ids.push(id.to_string());
        rows.push(row);
    }
    let t = n_variants.ok_or_else(|| Error::Shape("no data rows".into()))?;
    if t == 0 {
        return Err(Error::EmptyRegion("no variant columns".into()));
    }
    let n = rows.len();
    if n == 0 {
        return Err(Error::Shape("no subject rows".into()));
    }
    let raw_positions = if raw_positions.is_empty() {
        equally_spaced_raw(t)
    } else {
        raw_positions
    };
    let mut codes = Array2::from_elem((n, t), MISSING);
    for (i, row) in rows.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            codes[(i, j)] = c;
        }
    }
    let variant_ids = (1..=t).map(|j| format!("v{j}")).collect();
    GenotypeMatrix::from_parts(codes, &raw_positions, variant_ids, subject_ids)
}

fn parse_code(tok: &str) -> Result<i8> {
    match tok {
        "0" => Ok(0),
        "1" => Ok(1),
        "2" => Ok(2),
        "NA" => Ok(MISSING),
        other => Err(Error::Parse(format!("invalid genotype token: {other:?}"))),
    }
}

fn equally_spaced_raw(t: usize) -> Vec<f64> {
    if t == 1 {
        return vec![0.5];
    }
    (0..t).map(|j| j as f64 / (t - 1) as f64).collect()
}

/// Group assignment of every subject. Group indices are `0..k-1`,
/// each group nonempty, `k >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Phenotype {
    labels: Vec<usize>,
    group_sizes: Vec<usize>,
    group_names: Vec<String>,
}

impl Phenotype {
    pub fn from_labels(labels: Vec<usize>, group_names: Vec<String>) -> Result<Self> {
        let k = group_names.len();
        if k < 2 {
            return Err(Error::Group(format!("need at least 2 groups, got {k}")));
        }
        let mut group_sizes = vec![0usize; k];
        for &g in &labels {
            if g >= k {
                return Err(Error::Group(format!("label {g} out of range for k={k}")));
            }
            group_sizes[g] += 1;
        }
        if let Some(g) = group_sizes.iter().position(|&s| s == 0) {
            return Err(Error::Group(format!("group {:?} is empty", group_names[g])));
        }
        Ok(Phenotype {
            labels,
            group_sizes,
            group_names,
        })
    }

    /// Two groups named "0" (control) and "1" (case).
    pub fn case_control(labels: Vec<usize>) -> Result<Self> {
        Self::from_labels(labels, vec!["0".into(), "1".into()])
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    pub fn group_names(&self) -> &[String] {
        &self.group_names
    }

    /// 0/1 responses for the binary-trait methods; requires exactly 2 groups.
    pub fn binary_responses(&self) -> Result<Vec<f64>> {
        if self.k() != 2 {
            return Err(Error::Group(format!(
                "binary methods need exactly 2 groups, got {}",
                self.k()
            )));
        }
        Ok(self.labels.iter().map(|&g| g as f64).collect())
    }
}

/// Load a phenotype table (`subject_id<TAB>group`) aligned to the given
/// subject order. Group labels are mapped to indices in sorted label order.
pub fn load_phenotype<R: BufRead>(reader: R, subject_ids: &[String]) -> Result<Phenotype> {
    let mut by_id = std::collections::HashMap::new();
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let id = fields
            .next()
            .ok_or_else(|| Error::Parse("missing subject id in phenotype".into()))?;
        let group = fields
            .next()
            .ok_or_else(|| Error::Parse(format!("missing group for subject {id}")))?;
        if by_id.insert(id.to_string(), group.trim().to_string()).is_some() {
            return Err(Error::Parse(format!("duplicate phenotype row for {id}")));
        }
    }
    let mut names: Vec<String> = by_id.values().cloned().collect();
    names.sort();
    names.dedup();
    let index: std::collections::HashMap<&String, usize> =
        names.iter().enumerate().map(|(i, n)| (n, i)).collect();
    let mut labels = Vec::with_capacity(subject_ids.len());
    for id in subject_ids {
        let group = by_id
            .get(id)
            .ok_or_else(|| Error::Group(format!("no phenotype for subject {id}")))?;
        labels.push(index[group]);
    }
    Phenotype::from_labels(labels, names)
}

/// Per-column 0<->2 recoding flags. Applying a mask twice is the identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlipMask {
    flags: Vec<bool>,
}

impl FlipMask {
    pub fn new(flags: Vec<bool>) -> Self {
        FlipMask { flags }
    }

    pub fn none(n_variants: usize) -> Self {
        FlipMask {
            flags: vec![false; n_variants],
        }
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn n_flipped(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    /// Recode flagged columns 0<->2; 1 and missing entries are unchanged.
    pub fn apply(&self, g: &GenotypeMatrix) -> Result<GenotypeMatrix> {
        if self.flags.len() != g.n_variants() {
            return Err(Error::Shape(format!(
                "mask length {} does not match {} variants",
                self.flags.len(),
                g.n_variants()
            )));
        }
        let mut codes = g.codes.clone();
        for (j, &flip) in self.flags.iter().enumerate() {
            if !flip {
                continue;
            }
            for i in 0..g.n_subjects() {
                let c = codes[(i, j)];
                if c == 0 || c == 2 {
                    codes[(i, j)] = 2 - c;
                }
            }
        }
        Ok(GenotypeMatrix {
            codes,
            positions: g.positions.clone(),
            variant_ids: g.variant_ids.clone(),
            subject_ids: g.subject_ids.clone(),
        })
    }
}

/// Drop columns that are constant (fewer than two distinct non-missing
/// values) and re-normalize the surviving positions to `[0,1]`.
pub fn filter_constant_variants(g: &GenotypeMatrix) -> Result<GenotypeMatrix> {
    let mut keep = Vec::new();
    for j in 0..g.n_variants() {
        let mut seen: Option<i8> = None;
        let mut distinct = false;
        for i in 0..g.n_subjects() {
            let c = g.codes[(i, j)];
            if c == MISSING {
                continue;
            }
            match seen {
                None => seen = Some(c),
                Some(prev) if prev != c => {
                    distinct = true;
                    break;
                }
                _ => {}
            }
        }
        if distinct {
            keep.push(j);
        }
    }
    if keep.is_empty() {
        return Err(Error::EmptyRegion(
            "all variant columns are constant across subjects".into(),
        ));
    }
    let n = g.n_subjects();
    let mut codes = Array2::from_elem((n, keep.len()), MISSING);
    for (new_j, &j) in keep.iter().enumerate() {
        for i in 0..n {
            codes[(i, new_j)] = g.codes[(i, j)];
        }
    }
    let raw: Vec<f64> = keep.iter().map(|&j| g.positions[j]).collect();
    let variant_ids = keep.iter().map(|&j| g.variant_ids[j].clone()).collect();
    GenotypeMatrix::from_parts(codes, &raw, variant_ids, g.subject_ids.clone())
}

/// Total number of adjacent-column `{0,2}` patterns over all subjects.
/// Pairs with a missing member do not count.
pub fn count_flips(g: &GenotypeMatrix) -> usize {
    let mut flips = 0;
    for i in 0..g.n_subjects() {
        let row = g.codes.row(i);
        for j in 1..row.len() {
            let a = row[j - 1];
            let b = row[j];
            if (a == 0 && b == 2) || (a == 2 && b == 0) {
                flips += 1;
            }
        }
    }
    flips
}

/// Per adjacent column pair: flip counts when the two columns are recoded
/// the same way vs. differently. Only these two numbers matter because a
/// `{0,2}` pattern survives a double flip and a `{0,0}`/`{2,2}` pattern
/// becomes `{0,2}` under a single flip.
fn pair_costs(g: &GenotypeMatrix) -> Vec<(usize, usize)> {
    let t = g.n_variants();
    let mut costs = vec![(0usize, 0usize); t.saturating_sub(1)];
    for i in 0..g.n_subjects() {
        let row = g.codes.row(i);
        for j in 1..t {
            let a = row[j - 1];
            let b = row[j];
            if a == MISSING || b == MISSING {
                continue;
            }
            if (a == 0 && b == 2) || (a == 2 && b == 0) {
                costs[j - 1].0 += 1;
            } else if (a == 0 && b == 0) || (a == 2 && b == 2) {
                costs[j - 1].1 += 1;
            }
        }
    }
    costs
}

/// DP value: (flip count, number of flipped columns), ordered
/// lexicographically. Lexicographic order is preserved under addition, so
/// the chain DP is exact for both criteria.
type DpValue = (usize, usize);

fn pair_cost(costs: &[(usize, usize)], j: usize, a: bool, b: bool) -> usize {
    if a == b {
        costs[j - 1].0
    } else {
        costs[j - 1].1
    }
}

/// Exact minimizer of [`count_flips`] over all 2^T column masks, via a
/// two-state-per-column chain DP. Ties are broken toward fewer flipped
/// columns, then the lexicographically smallest mask.
pub fn relabel_minimize_flips(g: &GenotypeMatrix) -> Result<(GenotypeMatrix, FlipMask)> {
    let t = g.n_variants();
    let costs = pair_costs(g);

    // suffix[j][s]: best (cost of pairs j.., flips among columns j..) given
    // column j has state s (s counted in the flips).
    let mut suffix = vec![[(0usize, 0usize); 2]; t];
    for s in 0..2 {
        suffix[t - 1][s] = (0, s);
    }
    for j in (0..t - 1).rev() {
        for s in 0..2 {
            let mut best: Option<DpValue> = None;
            for s_next in 0..2 {
                let step = pair_cost(&costs, j + 1, s == 1, s_next == 1);
                let next = suffix[j + 1][s_next];
                let cand = (step + next.0, s + next.1);
                if best.is_none_or(|b| cand < b) {
                    best = Some(cand);
                }
            }
            suffix[j][s] = best.unwrap();
        }
    }

    // Greedy left-to-right walk keeps the overall optimum while preferring
    // `false` at each column, which yields the lexicographically smallest
    // optimal mask.
    let mut flags = vec![false; t];
    let mut prefix: DpValue = (0, 0);
    for j in 0..t {
        let mut chosen = 0usize;
        let mut best: Option<DpValue> = None;
        for s in 0..2 {
            let step = if j == 0 {
                0
            } else {
                pair_cost(&costs, j, flags[j - 1], s == 1)
            };
            let cand = (
                prefix.0 + step + suffix[j][s].0,
                prefix.1 + suffix[j][s].1,
            );
            if best.is_none_or(|b| cand < b) {
                best = Some(cand);
                chosen = s;
            }
        }
        flags[j] = chosen == 1;
        if j > 0 {
            prefix.0 += pair_cost(&costs, j, flags[j - 1], flags[j]);
        }
        prefix.1 += chosen;
    }

    let mask = FlipMask::new(flags);
    let relabeled = mask.apply(g)?;
    debug_assert_eq!(count_flips(&relabeled), suffix_optimum(&suffix));
    Ok((relabeled, mask))
}

fn suffix_optimum(suffix: &[[DpValue; 2]]) -> usize {
    suffix[0][0].0.min(suffix[0][1].0)
}

/// Exhaustive minimum flip count over all masks; the independent oracle for
/// [`relabel_minimize_flips`]. Limited to 20 variants.
pub fn brute_force_min_flips(g: &GenotypeMatrix) -> Result<(usize, FlipMask)> {
    const MAX: usize = 20;
    let t = g.n_variants();
    if t > MAX {
        return Err(Error::TooLargeForOracle {
            n_variants: t,
            max: MAX,
        });
    }
    let mut best: Option<(usize, usize, Vec<bool>)> = None;
    for bits in 0u32..(1u32 << t) {
        // Bit j set = flip column j; enumerate so that comparing reversed
        // flag vectors implements "lexicographically smallest mask".
        let flags: Vec<bool> = (0..t).map(|j| bits >> j & 1 == 1).collect();
        let mask = FlipMask::new(flags.clone());
        let flips = count_flips(&mask.apply(g)?);
        let n_flipped = mask.n_flipped();
        let better = match &best {
            None => true,
            Some((bf, bn, bflags)) => {
                (flips, n_flipped, &flags) < (*bf, *bn, bflags)
            }
        };
        if better {
            best = Some((flips, n_flipped, flags));
        }
    }
    let (flips, _, flags) = best.unwrap();
    Ok((flips, FlipMask::new(flags)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn matrix_from_rows(rows: &[&[i8]], positions: &[f64]) -> GenotypeMatrix {
        let n = rows.len();
        let t = rows[0].len();
        let mut codes = Array2::from_elem((n, t), MISSING);
        for (i, r) in rows.iter().enumerate() {
            for (j, &c) in r.iter().enumerate() {
                codes[(i, j)] = c;
            }
        }
        GenotypeMatrix::from_parts(
            codes,
            positions,
            (0..t).map(|j| format!("v{j}")).collect(),
            (0..n).map(|i| format!("s{i}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn load_normalizes_positions() {
        let src = "pos\t100\t200\t300\ns1\t0\t1\t2\n";
        let g = load_genotype_matrix(Cursor::new(src)).unwrap();
        assert_eq!(g.n_subjects(), 1);
        assert_eq!(g.n_variants(), 3);
        assert_eq!(g.positions(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn load_accepts_missing_token() {
        let src = "pos\t1\t2\ns1\t0\tNA\ns2\t1\t2\n";
        let g = load_genotype_matrix(Cursor::new(src)).unwrap();
        assert_eq!(g.code(0, 1), None);
        assert_eq!(g.code(1, 1), Some(2));
    }

    #[test]
    fn load_rejects_bad_code() {
        let src = "pos\t1\t2\ns1\t0\t3\n";
        assert!(matches!(
            load_genotype_matrix(Cursor::new(src)),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn load_rejects_nonmonotone_positions() {
        let src = "pos\t5\t5\ns1\t0\t1\n";
        assert!(matches!(
            load_genotype_matrix(Cursor::new(src)),
            Err(Error::Position(_))
        ));
        let src = "pos\t5\t4\ns1\t0\t1\n";
        assert!(matches!(
            load_genotype_matrix(Cursor::new(src)),
            Err(Error::Position(_))
        ));
    }

    #[test]
    fn load_rejects_ragged_rows() {
        let src = "pos\t1\t2\ns1\t0\t1\ns2\t0\n";
        assert!(matches!(
            load_genotype_matrix(Cursor::new(src)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn load_falls_back_to_equal_spacing() {
        let g = load_genotype_matrix(Cursor::new("pos\ns1\t0\t1\t2\ns2\t2\t1\t0\n")).unwrap();
        assert_eq!(g.positions(), &[0.0, 0.5, 1.0]);
    }

    #[test]
    fn tsv_round_trip() {
        let g = matrix_from_rows(&[&[0, 1, MISSING], &[2, 0, 1]], &[0.0, 0.3, 1.0]);
        let mut buf = Vec::new();
        g.write_tsv(&mut buf).unwrap();
        let back = load_genotype_matrix(Cursor::new(buf)).unwrap();
        assert_eq!(back.codes(), g.codes());
        assert_eq!(back.positions(), g.positions());
    }

    #[test]
    fn filter_drops_constant_columns() {
        let g = matrix_from_rows(
            &[&[0, 0, 1], &[0, 1, 1], &[0, 0, 2], &[0, 1, 0]],
            &[0.0, 0.4, 1.0],
        );
        let f = filter_constant_variants(&g).unwrap();
        assert_eq!(f.n_variants(), 2);
        assert_eq!(f.positions(), &[0.0, 1.0]);
        assert_eq!(f.variant_ids(), &["v1".to_string(), "v2".to_string()]);
    }

    #[test]
    fn filter_keeps_two_valued_column() {
        let g = matrix_from_rows(&[&[0, 0], &[1, 0], &[0, 0]], &[0.0, 1.0]);
        let f = filter_constant_variants(&g).unwrap();
        assert_eq!(f.n_variants(), 1);
    }

    #[test]
    fn filter_all_constant_is_empty_region() {
        let g = matrix_from_rows(&[&[1], &[1]], &[0.5]);
        assert!(matches!(
            filter_constant_variants(&g),
            Err(Error::EmptyRegion(_))
        ));
    }

    #[test]
    fn count_flips_examples() {
        let g = matrix_from_rows(&[&[0, 2, 0]], &[0.0, 0.5, 1.0]);
        assert_eq!(count_flips(&g), 2);
        let g = matrix_from_rows(&[&[0, 1, 2]], &[0.0, 0.5, 1.0]);
        assert_eq!(count_flips(&g), 0);
        let g = matrix_from_rows(&[&[0, 2], &[2, 0]], &[0.0, 1.0]);
        assert_eq!(count_flips(&g), 2);
    }

    #[test]
    fn count_flips_ignores_missing() {
        let g = matrix_from_rows(&[&[0, MISSING, 2]], &[0.0, 0.5, 1.0]);
        assert_eq!(count_flips(&g), 0);
    }

    #[test]
    fn relabel_zero_two_zero() {
        let g = matrix_from_rows(&[&[0, 2, 0]], &[0.0, 0.5, 1.0]);
        let (relabeled, mask) = relabel_minimize_flips(&g).unwrap();
        assert_eq!(mask.flags(), &[false, true, false]);
        assert_eq!(count_flips(&relabeled), 0);
        assert_eq!(relabeled.code(0, 0), Some(0));
        assert_eq!(relabeled.code(0, 1), Some(0));
        assert_eq!(relabeled.code(0, 2), Some(0));
    }

    #[test]
    fn relabel_single_snp_pattern() {
        // Seven subjects over two positions; flipping the second position
        // removes every {0,2} adjacency.
        let g = matrix_from_rows(
            &[
                &[0, 2],
                &[0, 2],
                &[2, 0],
                &[1, 1],
                &[0, 2],
                &[2, 0],
                &[0, 2],
            ],
            &[0.0, 1.0],
        );
        let (relabeled, mask) = relabel_minimize_flips(&g).unwrap();
        assert_eq!(mask.flags(), &[false, true]);
        assert_eq!(count_flips(&relabeled), 0);
    }

    #[test]
    fn relabel_prefers_fewer_flipped_columns_then_lex() {
        // No {0,2} adjacency at all: the all-false mask is among minimizers
        // and must be returned.
        let g = matrix_from_rows(&[&[0, 1, 0, 1]], &[0.0, 0.3, 0.6, 1.0]);
        let (_, mask) = relabel_minimize_flips(&g).unwrap();
        assert_eq!(mask.flags(), &[false, false, false, false]);
    }

    #[test]
    fn mask_involution() {
        let g = matrix_from_rows(&[&[0, 2, MISSING], &[1, 0, 2]], &[0.0, 0.5, 1.0]);
        let mask = FlipMask::new(vec![true, false, true]);
        let twice = mask.apply(&mask.apply(&g).unwrap()).unwrap();
        assert_eq!(twice, g);
    }

    #[test]
    fn brute_force_matches_dp_small_cases() {
        use rand::Rng;
        let mut rng = crate::rng::substream_rng(11, 99, 0);
        for _ in 0..40 {
            let n = rng.random_range(1..6);
            let t = rng.random_range(2..9);
            let mut codes = Array2::from_elem((n, t), MISSING);
            for i in 0..n {
                for j in 0..t {
                    let c = rng.random_range(0..5);
                    codes[(i, j)] = if c == 4 { MISSING } else { (c % 3) as i8 };
                }
            }
            let positions: Vec<f64> = (0..t).map(|j| j as f64).collect();
            let g = GenotypeMatrix::from_parts(
                codes,
                &positions,
                (0..t).map(|j| format!("v{j}")).collect(),
                (0..n).map(|i| format!("s{i}")).collect(),
            )
            .unwrap();
            let (relabeled, mask) = relabel_minimize_flips(&g).unwrap();
            let (bf_count, bf_mask) = brute_force_min_flips(&g).unwrap();
            assert_eq!(count_flips(&relabeled), bf_count);
            assert_eq!(mask, bf_mask, "tie-break mismatch");
        }
    }

    #[test]
    fn brute_force_rejects_large_inputs() {
        let g = matrix_from_rows(
            &[&[0; 21][..]],
            &(0..21).map(|j| j as f64).collect::<Vec<_>>(),
        );
        assert!(matches!(
            brute_force_min_flips(&g),
            Err(Error::TooLargeForOracle { .. })
        ));
    }

    #[test]
    fn phenotype_loading_and_validation() {
        let ids: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
        let ph = load_phenotype(Cursor::new("a\t1\nb\t0\nc\t1\n"), &ids).unwrap();
        assert_eq!(ph.k(), 2);
        assert_eq!(ph.labels(), &[1, 0, 1]);
        assert_eq!(ph.group_sizes(), &[1, 2]);
        assert!(load_phenotype(Cursor::new("a\t1\nb\t1\nc\t1\n"), &ids).is_err());
        assert!(load_phenotype(Cursor::new("a\t1\nb\t0\n"), &ids).is_err());
    }
}
