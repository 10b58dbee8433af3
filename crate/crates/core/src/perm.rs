//! Permutations, multi-permutations, partitions and index arrays.
//!
//! Composition convention, used everywhere in the crate: `(p∘q)(i) = p(q(i))`,
//! so `p.compose(&q)` applies `q` first. A product written `μσ` in a formula
//! translates to `mu.compose(&sigma)`.

use crate::error::{input, resource, Result};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Default ceiling on the degree of full `S_n` enumerations.
pub const DEFAULT_MAX_PERM_DEGREE: usize = 8;

/// Ceiling on `n` for `enumerate_sn`, overridable through `EQUIV_MAX_PERM_DEGREE`.
pub fn max_perm_degree() -> usize {
    std::env::var("EQUIV_MAX_PERM_DEGREE")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_PERM_DEGREE)
}

/// An element of `S_n`, stored as its image array: `images[i] = σ(i)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    images: Vec<usize>,
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = crate::error::EquivError;
    fn try_from(images: Vec<usize>) -> Result<Self> {
        Permutation::from_images(images)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Vec<usize> {
        p.images
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cycles: Vec<_> = self.cycles().into_iter().filter(|c| c.len() > 1).collect();
        if cycles.is_empty() {
            return write!(f, "e");
        }
        for c in cycles {
            let body: Vec<String> = c.iter().map(|i| i.to_string()).collect();
            write!(f, "({})", body.join(" "))?;
        }
        Ok(())
    }
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Permutation { images: (0..n).collect() }
    }

    pub fn from_images(images: Vec<usize>) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &x in &images {
            if x >= n || seen[x] {
                return input(format!("{images:?} is not a bijection on 0..{n}"));
            }
            seen[x] = true;
        }
        Ok(Permutation { images })
    }

    /// Build from disjoint cycles, e.g. `from_cycles(3, &[&[0, 1, 2]])` maps 0→1→2→0.
    pub fn from_cycles(n: usize, cycles: &[&[usize]]) -> Result<Self> {
        let mut images: Vec<usize> = (0..n).collect();
        let mut touched = vec![false; n];
        for cyc in cycles {
            for (pos, &x) in cyc.iter().enumerate() {
                if x >= n || touched[x] {
                    return input(format!("bad cycle list {cycles:?} for degree {n}"));
                }
                touched[x] = true;
                images[x] = cyc[(pos + 1) % cyc.len()];
            }
        }
        Ok(Permutation { images })
    }

    pub fn transposition(n: usize, a: usize, b: usize) -> Result<Self> {
        if a == b {
            return input("transposition needs two distinct points");
        }
        Self::from_cycles(n, &[&[a, b]])
    }

    /// The cycle `0 → 1 → … → n-1 → 0`.
    pub fn long_cycle(n: usize) -> Self {
        Permutation { images: (0..n).map(|i| (i + 1) % n.max(1)).collect() }
    }

    pub fn degree(&self) -> usize {
        self.images.len()
    }

    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.images[i]
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    /// `self ∘ other`: apply `other`, then `self`.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation> {
        if self.degree() != other.degree() {
            return input(format!(
                "degree mismatch in composition: {} vs {}",
                self.degree(),
                other.degree()
            ));
        }
        Ok(self.compose_unchecked(other))
    }

    pub(crate) fn compose_unchecked(&self, other: &Permutation) -> Permutation {
        Permutation { images: other.images.iter().map(|&j| self.images[j]).collect() }
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.degree()];
        for (i, &x) in self.images.iter().enumerate() {
            inv[x] = i;
        }
        Permutation { images: inv }
    }

    pub fn is_identity(&self) -> bool {
        self.images.iter().enumerate().all(|(i, &x)| i == x)
    }

    /// Cycles in canonical order: each starts at its smallest point, sorted by that point.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let n = self.degree();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut cyc = vec![start];
            seen[start] = true;
            let mut x = self.images[start];
            while x != start {
                seen[x] = true;
                cyc.push(x);
                x = self.images[x];
            }
            out.push(cyc);
        }
        out
    }

    pub fn cycle_count(&self) -> usize {
        let n = self.degree();
        let mut seen = vec![false; n];
        let mut count = 0;
        for start in 0..n {
            if seen[start] {
                continue;
            }
            count += 1;
            let mut x = start;
            while !seen[x] {
                seen[x] = true;
                x = self.images[x];
            }
        }
        count
    }

    pub fn cycle_type(&self) -> Partition {
        let mut parts: Vec<usize> = self.cycles().iter().map(|c| c.len()).collect();
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Partition { parts }
    }

    /// +1 or -1.
    pub fn sign(&self) -> i64 {
        if (self.degree() - self.cycle_count()).is_multiple_of(2) {
            1
        } else {
            -1
        }
    }

    /// `self` on `0..n` and `other` shifted onto `n..n+m`.
    pub fn disjoint_union(&self, other: &Permutation) -> Permutation {
        let n = self.degree();
        let mut images = self.images.clone();
        images.extend(other.images.iter().map(|&x| x + n));
        Permutation { images }
    }

    /// `self ∘ q ∘ self⁻¹`.
    pub fn conjugate(&self, q: &Permutation) -> Result<Permutation> {
        self.compose(q)?.compose(&self.inverse())
    }
}

/// Free-function form of [`Permutation::compose`].
pub fn compose(p: &Permutation, q: &Permutation) -> Result<Permutation> {
    p.compose(q)
}

pub fn inverse(p: &Permutation) -> Permutation {
    p.inverse()
}

pub fn cycle_type(p: &Permutation) -> Partition {
    p.cycle_type()
}

/// A partition of `n`, parts weakly decreasing and positive.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Partition {
    parts: Vec<usize>,
}

impl TryFrom<Vec<usize>> for Partition {
    type Error = crate::error::EquivError;
    fn try_from(parts: Vec<usize>) -> Result<Self> {
        Partition::new(parts)
    }
}

impl From<Partition> for Vec<usize> {
    fn from(p: Partition) -> Vec<usize> {
        p.parts
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body: Vec<String> = self.parts.iter().map(|p| p.to_string()).collect();
        write!(f, "[{}]", body.join(","))
    }
}

impl Partition {
    /// Parts must be positive; they are sorted into descending order.
    pub fn new(mut parts: Vec<usize>) -> Result<Self> {
        if parts.contains(&0) {
            return input(format!("partition parts must be positive: {parts:?}"));
        }
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Ok(Partition { parts })
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    pub fn size(&self) -> usize {
        self.parts.iter().sum()
    }

    pub fn length(&self) -> usize {
        self.parts.len()
    }

    /// Multiplicity of each part length, indexed by length (index 0 unused).
    pub fn multiplicities(&self) -> Vec<usize> {
        let mut m = vec![0; self.size() + 1];
        for &p in &self.parts {
            m[p] += 1;
        }
        m
    }

    /// Centralizer order `z_λ = Π_j j^{m_j} m_j!`.
    pub fn z(&self) -> u128 {
        let mut z: u128 = 1;
        for (j, &m) in self.multiplicities().iter().enumerate().skip(1) {
            for k in 1..=m {
                z *= (j as u128) * (k as u128);
            }
        }
        z
    }

    /// Number of permutations of this cycle type.
    pub fn class_size(&self) -> u128 {
        factorial(self.size()) / self.z()
    }

    pub fn sign(&self) -> i64 {
        if (self.size() - self.length()).is_multiple_of(2) {
            1
        } else {
            -1
        }
    }

    /// A fixed permutation of this cycle type: consecutive blocks in part order.
    pub fn representative(&self) -> Permutation {
        let n = self.size();
        let mut images = vec![0; n];
        let mut start = 0;
        for &p in &self.parts {
            for k in 0..p {
                images[start + k] = start + (k + 1) % p;
            }
            start += p;
        }
        Permutation { images }
    }

    /// Conjugate (transposed Young diagram).
    pub fn conjugate(&self) -> Partition {
        let width = self.parts.first().copied().unwrap_or(0);
        let parts = (0..width)
            .map(|col| self.parts.iter().filter(|&&p| p > col).count())
            .collect();
        Partition { parts }
    }
}

pub fn class_size(lambda: &Partition) -> u128 {
    lambda.class_size()
}

pub fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}

/// All partitions of `n` in reverse lexicographic order (`[n]` first, `[1^n]` last).
pub fn partitions(n: usize) -> Vec<Partition> {
    fn rec(rest: usize, cap: usize, cur: &mut Vec<usize>, out: &mut Vec<Partition>) {
        if rest == 0 {
            out.push(Partition { parts: cur.clone() });
            return;
        }
        for p in (1..=rest.min(cap)).rev() {
            cur.push(p);
            rec(rest - p, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, n, &mut Vec::new(), &mut out);
    out
}

/// Lexicographic enumeration of `S_n`.
pub struct SnIter {
    next: Option<Vec<usize>>,
}

impl Iterator for SnIter {
    type Item = Permutation;
    fn next(&mut self) -> Option<Permutation> {
        let cur = self.next.take()?;
        let mut succ = cur.clone();
        if next_lex(&mut succ) {
            self.next = Some(succ);
        }
        Some(Permutation { images: cur })
    }
}

fn next_lex(a: &mut [usize]) -> bool {
    if a.len() < 2 {
        return false;
    }
    let mut i = a.len() - 1;
    while i > 0 && a[i - 1] >= a[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = a.len() - 1;
    while a[j] <= a[i - 1] {
        j -= 1;
    }
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}

/// Every element of `S_n` exactly once, in lexicographic order of image arrays.
pub fn enumerate_sn(n: usize) -> Result<SnIter> {
    let cap = max_perm_degree();
    if n > cap {
        return resource(format!(
            "S_{n} enumeration exceeds the degree bound {cap} (set EQUIV_MAX_PERM_DEGREE to raise it)"
        ));
    }
    Ok(SnIter { next: Some((0..n).collect()) })
}

/// Elements of `S_n` with the given cycle type.
pub fn enumerate_class(lambda: &Partition) -> Result<Vec<Permutation>> {
    Ok(enumerate_sn(lambda.size())?.filter(|p| &p.cycle_type() == lambda).collect())
}

/// Whether a scalar product multiplies from the left or the right.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// A `D`-tuple of permutations of a common degree, one per tensor color.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<Permutation>", into = "Vec<Permutation>")]
pub struct MultiPermutation {
    components: Vec<Permutation>,
}

impl TryFrom<Vec<Permutation>> for MultiPermutation {
    type Error = crate::error::EquivError;
    fn try_from(c: Vec<Permutation>) -> Result<Self> {
        MultiPermutation::new(c)
    }
}

impl From<MultiPermutation> for Vec<Permutation> {
    fn from(m: MultiPermutation) -> Vec<Permutation> {
        m.components
    }
}

impl fmt::Display for MultiPermutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body: Vec<String> = self.components.iter().map(|p| p.to_string()).collect();
        write!(f, "({})", body.join(", "))
    }
}

impl MultiPermutation {
    pub fn new(components: Vec<Permutation>) -> Result<Self> {
        let Some(first) = components.first() else {
            return input("a multi-permutation needs at least one color");
        };
        let n = first.degree();
        if components.iter().any(|p| p.degree() != n) {
            return input("multi-permutation components must share one degree");
        }
        Ok(MultiPermutation { components })
    }

    pub fn identity(n: usize, d: usize) -> Self {
        MultiPermutation { components: vec![Permutation::identity(n); d.max(1)] }
    }

    /// `(μ, …, μ)` with `d` copies.
    pub fn diagonal(mu: &Permutation, d: usize) -> Self {
        MultiPermutation { components: vec![mu.clone(); d.max(1)] }
    }

    pub fn colors(&self) -> usize {
        self.components.len()
    }

    pub fn degree(&self) -> usize {
        self.components[0].degree()
    }

    pub fn component(&self, c: usize) -> &Permutation {
        &self.components[c]
    }

    pub fn components(&self) -> &[Permutation] {
        &self.components
    }

    pub fn inverse(&self) -> MultiPermutation {
        MultiPermutation { components: self.components.iter().map(|p| p.inverse()).collect() }
    }

    /// Componentwise product `a ∘ b`.
    pub fn compose(&self, other: &MultiPermutation) -> Result<MultiPermutation> {
        if self.colors() != other.colors() {
            return input("color count mismatch in multi-permutation product");
        }
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(p, q)| p.compose(q))
            .collect::<Result<Vec<_>>>()?;
        Ok(MultiPermutation { components })
    }

    /// `self` on slots `0..n`, `other` on `n..n+m`, color by color.
    pub fn disjoint_union(&self, other: &MultiPermutation) -> Result<MultiPermutation> {
        if self.colors() != other.colors() {
            return input("color count mismatch in disjoint union");
        }
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(p, q)| p.disjoint_union(q))
            .collect();
        Ok(MultiPermutation { components })
    }

    /// Drop color `c` (0-based).
    pub fn without_color(&self, c: usize) -> Result<MultiPermutation> {
        if c >= self.colors() || self.colors() < 2 {
            return input(format!("cannot remove color {c} from a {}-color tuple", self.colors()));
        }
        let components =
            self.components.iter().enumerate().filter(|(j, _)| *j != c).map(|(_, p)| p.clone()).collect();
        Ok(MultiPermutation { components })
    }

    /// `(μ a_1 μ⁻¹, …)`.
    pub fn conjugate_by(&self, mu: &Permutation) -> Result<MultiPermutation> {
        let components =
            self.components.iter().map(|p| mu.conjugate(p)).collect::<Result<Vec<_>>>()?;
        Ok(MultiPermutation { components })
    }
}

/// Componentwise `μa` (left) or `aμ` (right).
pub fn scalar_distribute(mu: &Permutation, a: &MultiPermutation, side: Side) -> Result<MultiPermutation> {
    let components = a
        .components
        .iter()
        .map(|p| match side {
            Side::Left => mu.compose(p),
            Side::Right => p.compose(mu),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MultiPermutation { components })
}

/// An `n × D` array of indices in `0..N`; row `i` is the multi-index `k_i`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IndexArray {
    n: usize,
    d: usize,
    dim: usize,
    entries: Vec<usize>,
}

impl IndexArray {
    pub fn new(n: usize, d: usize, dim: usize, entries: Vec<usize>) -> Result<Self> {
        if entries.len() != n * d {
            return input(format!("index array needs {} entries, got {}", n * d, entries.len()));
        }
        if entries.iter().any(|&x| x >= dim) {
            return input(format!("index array entries must lie below {dim}"));
        }
        Ok(IndexArray { n, d, dim, entries })
    }

    pub fn from_rows(rows: &[Vec<usize>], dim: usize) -> Result<Self> {
        let d = rows.first().map_or(1, |r| r.len());
        if rows.iter().any(|r| r.len() != d) {
            return input("ragged index array");
        }
        Self::new(rows.len(), d, dim, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn colors(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> usize {
        self.entries[i * self.d + j]
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.entries[i * self.d..(i + 1) * self.d]
    }
}

/// `(a_* k)_{ij} = k_{a_j⁻¹(i), j}`: color `j` of row `i` is taken from row `a_j⁻¹(i)`.
pub fn act_on_index_array(a: &MultiPermutation, k: &IndexArray) -> Result<IndexArray> {
    if a.degree() != k.n || a.colors() != k.d {
        return input(format!(
            "shape mismatch: multi-permutation is {}x{}, index array {}x{}",
            a.degree(),
            a.colors(),
            k.n,
            k.d
        ));
    }
    let mut entries = vec![0; k.entries.len()];
    for (j, p) in a.components.iter().enumerate() {
        for i in 0..k.n {
            // a_j(src) = i
            let src = p.apply(i);
            entries[src * k.d + j] = k.get(i, j);
        }
    }
    Ok(IndexArray { n: k.n, d: k.d, dim: k.dim, entries })
}

/// Odometer over all index tuples of length `len` with entries in `0..dim`.
pub(crate) struct Odometer {
    digits: Vec<usize>,
    dim: usize,
    done: bool,
}

impl Odometer {
    pub(crate) fn new(len: usize, dim: usize) -> Self {
        Odometer { digits: vec![0; len], dim, done: dim == 0 && len > 0 }
    }

    /// Current tuple, or `None` once exhausted. Call `advance` to move on.
    pub(crate) fn current(&self) -> Option<&[usize]> {
        if self.done {
            None
        } else {
            Some(&self.digits)
        }
    }

    pub(crate) fn advance(&mut self) {
        for d in self.digits.iter_mut().rev() {
            *d += 1;
            if *d < self.dim {
                return;
            }
            *d = 0;
        }
        self.done = true;
    }
}
