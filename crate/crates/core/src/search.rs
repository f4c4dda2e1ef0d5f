//! Simultaneous base-`p` digit constraints.
//!
//! An integer `n` qualifies for a [`DigitConstraintProblem`] when, for every
//! prime `p_j`, each base-`p_j` digit of `n` is at most `cap_j`. With the
//! default caps `(p_j - 1) / 2` this is exactly the condition that `n + n`
//! has no carries in any base, i.e. that no `p_j` divides `binom(2n, n)`.
//! In relaxed mode up to `ceil(eps * digit_count_j)` digits per prime may
//! exceed the cap.
//!
//! Two enumerators are provided. [`enumerate_qualifying`] tests every
//! `n <= limit`. [`PrunedSearch`] walks base-`p_min` digit strings from the
//! most significant position down and cuts a subtree as soon as the digits
//! shared by every integer in the subtree's range already violate a cap in
//! some other base. The walk is resumable through [`SearchCheckpoint`].

use std::io::{Read, Write};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::arith::{small_digits, PrimeSet};
use crate::{heuristics, Error, Result};

/// Named cap presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CapPreset {
    /// `floor((p - 1) / 2)`: no carry when doubling.
    Half,
    /// `floor(p / 3)`: the threshold of the block construction.
    Third,
}

impl CapPreset {
    pub fn cap(self, p: u64) -> u64 {
        match self {
            CapPreset::Half => (p - 1) / 2,
            CapPreset::Third => p / 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Caps {
    Preset(CapPreset),
    Explicit(Vec<u64>),
}

impl Caps {
    /// `half`, `third`, or a comma-separated list of explicit caps.
    pub fn parse(s: &str) -> Result<Caps> {
        match s.trim() {
            "half" => Ok(Caps::Preset(CapPreset::Half)),
            "third" => Ok(Caps::Preset(CapPreset::Third)),
            other => other
                .split(',')
                .map(|c| {
                    c.trim()
                        .parse::<u64>()
                        .map_err(|_| Error::InvalidParameter(format!("bad cap {c:?}")))
                })
                .collect::<Result<Vec<_>>>()
                .map(Caps::Explicit),
        }
    }
}

/// Largest limit accepted by the brute-force enumerator.
pub const EXHAUSTIVE_LIMIT_MAX: u128 = 1 << 64;

/// Largest limit accepted by the pruned enumerator.
pub const PRUNED_LIMIT_MAX: u128 = 1 << 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DigitConstraintProblem {
    primes: PrimeSet,
    caps: Vec<u64>,
    limit: u128,
    relax_epsilon: Option<f64>,
}

impl DigitConstraintProblem {
    pub fn new(
        primes: PrimeSet,
        caps: Caps,
        limit: u128,
        relax_epsilon: Option<f64>,
    ) -> Result<Self> {
        if limit == 0 {
            return Err(Error::InvalidParameter("limit must be at least 1".into()));
        }
        let caps = match caps {
            Caps::Preset(preset) => primes.iter().map(|p| preset.cap(p)).collect(),
            Caps::Explicit(c) => c,
        };
        if caps.len() != primes.len() {
            return Err(Error::InvalidParameter(format!(
                "{} caps given for {} primes",
                caps.len(),
                primes.len()
            )));
        }
        for (cap, p) in caps.iter().zip(primes.iter()) {
            if *cap >= p {
                return Err(Error::InvalidParameter(format!(
                    "cap {cap} is not below its prime {p}"
                )));
            }
        }
        if let Some(eps) = relax_epsilon {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "relax epsilon {eps} outside (0, 1)"
                )));
            }
        }
        Ok(Self {
            primes,
            caps,
            limit,
            relax_epsilon,
        })
    }

    /// Default (no-carry) caps, exact mode.
    pub fn graham(primes: PrimeSet, limit: u128) -> Result<Self> {
        Self::new(primes, Caps::Preset(CapPreset::Half), limit, None)
    }

    pub fn primes(&self) -> &PrimeSet {
        &self.primes
    }

    pub fn caps(&self) -> &[u64] {
        &self.caps
    }

    pub fn limit(&self) -> u128 {
        self.limit
    }

    pub fn relax_epsilon(&self) -> Option<f64> {
        self.relax_epsilon
    }

    pub fn with_limit(&self, limit: u128) -> Result<Self> {
        Self::new(
            self.primes.clone(),
            Caps::Explicit(self.caps.clone()),
            limit,
            self.relax_epsilon,
        )
    }

    /// Violating digits tolerated for an `n` with `digit_count` digits.
    pub fn allowed_violations(&self, digit_count: usize) -> usize {
        match self.relax_epsilon {
            None => 0,
            Some(eps) => (eps * digit_count as f64).ceil() as usize,
        }
    }

    /// Direct per-base digit check of a single `n`.
    pub fn qualifies(&self, n: u128) -> bool {
        if n == 0 {
            return false;
        }
        self.primes.iter().zip(&self.caps).all(|(p, &cap)| {
            let digits = small_digits(n, p);
            let bad = digits.iter().filter(|&&d| d > cap).count();
            bad <= self.allowed_violations(digits.len())
        })
    }

    /// SHA-256 over primes, caps, limit and relax epsilon.
    pub fn fingerprint(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"lowmult-digit-problem-v1");
        h.update((self.primes.len() as u64).to_le_bytes());
        for p in self.primes.iter() {
            h.update(p.to_le_bytes());
        }
        for c in &self.caps {
            h.update(c.to_le_bytes());
        }
        h.update(self.limit.to_le_bytes());
        match self.relax_epsilon {
            None => h.update([0u8]),
            Some(e) => {
                h.update([1u8]);
                h.update(e.to_bits().to_le_bytes());
            }
        }
        h.finalize().into()
    }
}

/// Brute force over `1..=limit`.
pub fn enumerate_qualifying(problem: &DigitConstraintProblem) -> Result<Vec<u128>> {
    if problem.limit > EXHAUSTIVE_LIMIT_MAX {
        return Err(Error::InvalidParameter(format!(
            "exhaustive mode needs limit <= 2^64, got {}",
            problem.limit
        )));
    }
    Ok((1..=problem.limit).filter(|&n| problem.qualifies(n)).collect())
}

/// Runs the pruned search to completion on one thread.
pub fn enumerate_prefix_pruned(problem: &DigitConstraintProblem) -> Result<Vec<u128>> {
    let mut search = PrunedSearch::new(problem)?;
    search.run(None);
    Ok(search.into_found())
}

/// Resumable enumerator state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchCheckpoint {
    pub fingerprint: [u8; 32],
    /// One cursor per top-digit partition; `None` once exhausted. A cursor is
    /// the base-`p_min` digit path (most significant first) of the next node
    /// to visit.
    pub partitions: Vec<Option<Vec<u32>>>,
    pub found: Vec<u128>,
    pub node_count: u64,
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"LMCK";
const CHECKPOINT_VERSION: u16 = 1;

impl SearchCheckpoint {
    pub fn is_complete(&self) -> bool {
        self.partitions.iter().all(Option::is_none)
    }

    fn payload(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.fingerprint);
        out.extend_from_slice(&self.node_count.to_le_bytes());
        out.extend_from_slice(&(self.partitions.len() as u32).to_le_bytes());
        for part in &self.partitions {
            match part {
                None => out.push(0),
                Some(path) => {
                    out.push(1);
                    out.extend_from_slice(&(path.len() as u32).to_le_bytes());
                    for d in path {
                        out.extend_from_slice(&d.to_le_bytes());
                    }
                }
            }
        }
        out.extend_from_slice(&(self.found.len() as u64).to_le_bytes());
        for n in &self.found {
            out.extend_from_slice(&n.to_le_bytes());
        }
        out
    }

    /// Versioned, length-prefixed, checksummed little-endian record.
    pub fn save<W: Write>(&self, mut sink: W) -> Result<()> {
        let payload = self.payload();
        let digest = Sha256::digest(&payload);
        sink.write_all(CHECKPOINT_MAGIC)?;
        sink.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        sink.write_all(&(payload.len() as u64).to_le_bytes())?;
        sink.write_all(&payload)?;
        sink.write_all(&digest[..8])?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut v = Vec::new();
        self.save(&mut v).expect("writing to a Vec cannot fail");
        v
    }

    pub fn load<R: Read>(mut source: R) -> Result<Self> {
        let mut header = [0u8; 14];
        read_exact_or_corrupt(&mut source, &mut header, "header")?;
        if &header[..4] != CHECKPOINT_MAGIC {
            return Err(Error::CorruptCheckpoint("bad magic".into()));
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != CHECKPOINT_VERSION {
            return Err(Error::CorruptCheckpoint(format!(
                "unsupported version {version}"
            )));
        }
        let len = u64::from_le_bytes(header[6..14].try_into().unwrap());
        if len > (1 << 40) {
            return Err(Error::CorruptCheckpoint(format!("implausible length {len}")));
        }
        let mut payload = vec![0u8; len as usize];
        read_exact_or_corrupt(&mut source, &mut payload, "payload")?;
        let mut checksum = [0u8; 8];
        read_exact_or_corrupt(&mut source, &mut checksum, "checksum")?;
        if Sha256::digest(&payload)[..8] != checksum {
            return Err(Error::CorruptCheckpoint("checksum mismatch".into()));
        }
        let mut cur = Cursor::new(&payload);
        let fingerprint: [u8; 32] = cur.take(32)?.try_into().unwrap();
        let node_count = cur.u64()?;
        let n_parts = cur.u32()? as usize;
        let mut partitions = Vec::with_capacity(n_parts.min(1 << 16));
        for _ in 0..n_parts {
            match cur.take(1)?[0] {
                0 => partitions.push(None),
                1 => {
                    let len = cur.u32()? as usize;
                    let mut path = Vec::with_capacity(len.min(1 << 12));
                    for _ in 0..len {
                        path.push(cur.u32()?);
                    }
                    partitions.push(Some(path));
                }
                tag => {
                    return Err(Error::CorruptCheckpoint(format!(
                        "bad partition tag {tag}"
                    )))
                }
            }
        }
        let n_found = cur.u64()? as usize;
        let mut found = Vec::with_capacity(n_found.min(1 << 20));
        for _ in 0..n_found {
            found.push(u128::from_le_bytes(cur.take(16)?.try_into().unwrap()));
        }
        if cur.pos != payload.len() {
            return Err(Error::CorruptCheckpoint("trailing bytes in payload".into()));
        }
        Ok(Self {
            fingerprint,
            partitions,
            found,
            node_count,
        })
    }
}

fn read_exact_or_corrupt<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => {
            Error::CorruptCheckpoint(format!("truncated {what}"))
        }
        _ => Error::Io(e),
    })
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::CorruptCheckpoint("payload ends early".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Fixed description of the digit tree for one problem.
#[derive(Clone, Debug)]
struct TreePlan {
    base: u64,
    base_index: usize,
    depth: usize,
    max_digit: u32,
    /// `base^k` for `k = 0..=depth`.
    powers: Vec<u128>,
    /// Largest suffix value over `k` free positions.
    max_suffix: Vec<u128>,
}

impl TreePlan {
    fn new(problem: &DigitConstraintProblem) -> Result<Self> {
        if problem.limit > PRUNED_LIMIT_MAX {
            return Err(Error::InvalidParameter(format!(
                "pruned mode needs limit <= 2^100, got {}",
                problem.limit
            )));
        }
        let (base_index, base) = problem
            .primes
            .iter()
            .enumerate()
            .min_by_key(|&(_, p)| p)
            .expect("prime set is non-empty");
        let depth = small_digits(problem.limit, base).len();
        let relaxed = problem.relax_epsilon.is_some();
        let max_digit = if relaxed {
            base - 1
        } else {
            problem.caps[base_index]
        } as u32;
        let mut powers = vec![1u128];
        let mut max_suffix = vec![0u128];
        for k in 1..=depth {
            powers.push(powers[k - 1] * base as u128);
            max_suffix.push(max_suffix[k - 1] * base as u128 + max_digit as u128);
        }
        Ok(Self {
            base,
            base_index,
            depth,
            max_digit,
            powers,
            max_suffix,
        })
    }

    fn partition_count(&self) -> usize {
        self.max_digit as usize + 1
    }
}

/// Resumable depth-first search over base-`p_min` digit strings.
pub struct PrunedSearch<'a> {
    problem: &'a DigitConstraintProblem,
    plan: TreePlan,
    state: SearchCheckpoint,
}

impl<'a> PrunedSearch<'a> {
    pub fn new(problem: &'a DigitConstraintProblem) -> Result<Self> {
        let plan = TreePlan::new(problem)?;
        let partitions = (0..plan.partition_count() as u32)
            .map(|d| Some(vec![d]))
            .collect();
        Ok(Self {
            problem,
            plan,
            state: SearchCheckpoint {
                fingerprint: problem.fingerprint(),
                partitions,
                found: Vec::new(),
                node_count: 0,
            },
        })
    }

    /// Continues from a checkpoint; refuses if it belongs to another problem.
    pub fn resume(problem: &'a DigitConstraintProblem, checkpoint: SearchCheckpoint) -> Result<Self> {
        if checkpoint.fingerprint != problem.fingerprint() {
            return Err(Error::FingerprintMismatch);
        }
        let plan = TreePlan::new(problem)?;
        if checkpoint.partitions.len() != plan.partition_count() {
            return Err(Error::CorruptCheckpoint(format!(
                "{} partitions, expected {}",
                checkpoint.partitions.len(),
                plan.partition_count()
            )));
        }
        for path in checkpoint.partitions.iter().flatten() {
            if path.is_empty()
                || path.len() > plan.depth
                || path.iter().any(|&d| d > plan.max_digit)
            {
                return Err(Error::CorruptCheckpoint("cursor outside the digit tree".into()));
            }
        }
        Ok(Self {
            problem,
            plan,
            state: checkpoint,
        })
    }

    pub fn checkpoint(&self) -> &SearchCheckpoint {
        &self.state
    }

    pub fn node_count(&self) -> u64 {
        self.state.node_count
    }

    pub fn is_complete(&self) -> bool {
        self.state.is_complete()
    }

    /// Visits up to `budget` nodes (all remaining if `None`), partitions in
    /// order. Returns true once the whole tree is exhausted.
    pub fn run(&mut self, budget: Option<u64>) -> bool {
        let mut remaining = budget.unwrap_or(u64::MAX);
        for i in 0..self.state.partitions.len() {
            let Some(cursor) = self.state.partitions[i].take() else {
                continue;
            };
            let mut found = Vec::new();
            let (cursor, used) =
                walk_partition(self.problem, &self.plan, cursor, remaining, &mut found);
            self.state.partitions[i] = cursor;
            self.state.node_count += used;
            self.state.found.extend(found);
            remaining -= used;
            if remaining == 0 {
                break;
            }
        }
        self.is_complete()
    }

    /// Finishes every open partition, one task per partition on a pool of
    /// `workers` threads. Results are merged by sorted union.
    pub fn run_parallel(&mut self, workers: usize) -> Result<()> {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
        let problem = self.problem;
        let plan = &self.plan;
        let cursors: Vec<Option<Vec<u32>>> = self.state.partitions.iter_mut().map(Option::take).collect();
        let results: Vec<(Vec<u128>, u64)> = pool.install(|| {
            cursors
                .into_par_iter()
                .map(|cursor| match cursor {
                    None => (Vec::new(), 0),
                    Some(c) => {
                        let mut found = Vec::new();
                        let (_, used) = walk_partition(problem, plan, c, u64::MAX, &mut found);
                        (found, used)
                    }
                })
                .collect()
        });
        for (found, used) in results {
            self.state.found.extend(found);
            self.state.node_count += used;
        }
        self.state.found.sort_unstable();
        self.state.found.dedup();
        Ok(())
    }

    /// Sorted qualifying integers found so far.
    pub fn found(&self) -> Vec<u128> {
        let mut v = self.state.found.clone();
        v.sort_unstable();
        v
    }

    pub fn into_found(self) -> Vec<u128> {
        let mut v = self.state.found;
        v.sort_unstable();
        v
    }

    pub fn into_checkpoint(self) -> SearchCheckpoint {
        self.state
    }
}

/// Walks one partition from `cursor` for at most `budget` nodes.
fn walk_partition(
    problem: &DigitConstraintProblem,
    plan: &TreePlan,
    mut path: Vec<u32>,
    budget: u64,
    found: &mut Vec<u128>,
) -> (Option<Vec<u32>>, u64) {
    let mut used = 0u64;
    while used < budget {
        used += 1;
        let expand = visit(problem, plan, &path, found);
        if !advance(&mut path, expand, plan.max_digit) {
            return (None, used);
        }
    }
    (Some(path), used)
}

/// Moves `path` to the next node in preorder; false when the partition root
/// has been left.
fn advance(path: &mut Vec<u32>, expand: bool, max_digit: u32) -> bool {
    if expand {
        path.push(0);
        return true;
    }
    while let Some(d) = path.pop() {
        if path.is_empty() {
            return false;
        }
        if d < max_digit {
            path.push(d + 1);
            return true;
        }
    }
    false
}

/// Processes one node; returns whether its children should be visited.
fn visit(
    problem: &DigitConstraintProblem,
    plan: &TreePlan,
    path: &[u32],
    found: &mut Vec<u128>,
) -> bool {
    let fixed = path.len();
    let free = plan.depth - fixed;
    let mut prefix = 0u128;
    for &d in path {
        prefix = prefix * plan.base as u128 + d as u128;
    }
    let lo = prefix * plan.powers[free];
    if lo > problem.limit {
        return false;
    }
    if free == 0 {
        if problem.qualifies(lo) {
            found.push(lo);
        }
        return false;
    }
    let hi = (lo + plan.max_suffix[free]).min(problem.limit);

    if problem.relax_epsilon.is_some() {
        let cap = problem.caps[plan.base_index];
        let bad = path.iter().filter(|&&d| d as u64 > cap).count();
        if bad > problem.allowed_violations(plan.depth) {
            return false;
        }
    }
    for (j, (q, &cap)) in problem.primes.iter().zip(&problem.caps).enumerate() {
        if j == plan.base_index {
            continue;
        }
        if shared_prefix_violations(lo, hi, q, cap, problem) {
            return false;
        }
    }
    true
}

/// True when the base-`q` digits common to every integer in `[lo, hi]`
/// already break the cap (or exceed the relaxed allowance).
fn shared_prefix_violations(
    lo: u128,
    hi: u128,
    q: u64,
    cap: u64,
    problem: &DigitConstraintProblem,
) -> bool {
    let hi_digits = small_digits(hi, q);
    let lo_digits = small_digits(lo, q);
    let mut bad = 0usize;
    for pos in (0..hi_digits.len()).rev() {
        let h = hi_digits[pos];
        let l = lo_digits.get(pos).copied().unwrap_or(0);
        if h != l {
            break;
        }
        if h > cap {
            bad += 1;
        }
    }
    bad > problem.allowed_violations(hi_digits.len())
}

/// One census bucket: qualifying `n <= upper`, and the heuristic estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CensusBucket {
    pub upper: u128,
    pub count: u64,
    pub predicted: f64,
}

/// Cumulative counts at `2^k` for `k >= bucket_exponent` below the limit,
/// plus a final bucket at the limit itself.
pub fn census(problem: &DigitConstraintProblem, bucket_exponent: u32) -> Result<Vec<CensusBucket>> {
    let found = enumerate_prefix_pruned(problem)?;
    let mut uppers = Vec::new();
    let mut k = bucket_exponent;
    while k < 127 && (1u128 << k) < problem.limit {
        uppers.push(1u128 << k);
        k += 1;
    }
    uppers.push(problem.limit);
    uppers
        .into_iter()
        .map(|upper| {
            let count = found.partition_point(|&n| n <= upper) as u64;
            let predicted = heuristics::predicted_count(&problem.primes, &BigUint::from(upper))?;
            Ok(CensusBucket {
                upper,
                count,
                predicted,
            })
        })
        .collect()
}
