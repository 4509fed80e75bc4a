use std::io::{Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_input, invalid_param, Error, Result};
use crate::linalg::{cyclic_shift, CMatrix, C64};

use super::gabor::{circulant_user_sequences, gabor_user_sequences};
use super::kerdock::{kerdock_block_circulant, kerdock_degree};
use super::seeds::{alltop_seed, random_phase_seed};

/// Signature codebook families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    AlltopGabor,
    RandomGabor,
    Kerdock,
    RandomBlock,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::Kerdock, Family::RandomBlock, Family::AlltopGabor, Family::RandomGabor];

    pub fn name(self) -> &'static str {
        match self {
            Family::AlltopGabor => "alltop-gabor",
            Family::RandomGabor => "random-gabor",
            Family::Kerdock => "kerdock",
            Family::RandomBlock => "random-block",
        }
    }

    pub fn is_random(self) -> bool {
        matches!(self, Family::RandomGabor | Family::RandomBlock)
    }

    fn code(self) -> u8 {
        match self {
            Family::AlltopGabor => 0,
            Family::RandomGabor => 1,
            Family::Kerdock => 2,
            Family::RandomBlock => 3,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        Ok(match c {
            0 => Family::AlltopGabor,
            1 => Family::RandomGabor,
            2 => Family::Kerdock,
            3 => Family::RandomBlock,
            _ => return Err(invalid_input(format!("unknown family code {c}"))),
        })
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| invalid_param(format!("unknown codebook family '{s}'")))
    }
}

/// Maximum number of users at maximum delay `tau`.
///
/// For Kerdock `p` is the code length `2^m` (sequences have `p - 1` chips).
pub fn user_capacity(p: usize, tau: usize, family: Family) -> usize {
    match family {
        Family::Kerdock => p * (p.saturating_sub(2) / (tau + 1)),
        _ => p * (p / (tau + 1)),
    }
}

/// Column index of `(user, delay)` in a shift dictionary. Users and delays
/// are 0-based; with 1-based user `n` this is `(n-1)(tau+1) + delay`.
#[inline]
pub fn flat_index(user: usize, delay: usize, tau: usize) -> usize {
    user * (tau + 1) + delay
}

#[inline]
pub fn user_of(col: usize, tau: usize) -> usize {
    col / (tau + 1)
}

#[inline]
pub fn delay_of(col: usize, tau: usize) -> usize {
    col % (tau + 1)
}

/// Appends the first `tau + 1` chips: `L = P + tau + 1`.
pub fn cyclic_prefix_extend(base: &[C64], tau: usize) -> Result<Vec<C64>> {
    if tau + 1 > base.len() {
        return Err(invalid_param(format!("tau + 1 = {} exceeds sequence length {}", tau + 1, base.len())));
    }
    let mut out = base.to_vec();
    out.extend_from_slice(&base[..tau + 1]);
    Ok(out)
}

/// A family of base signature sequences (one column per user) plus the
/// delay budget they were laid out for. Sequences are stored unnormalised.
#[derive(Clone, Debug, PartialEq)]
pub struct Codebook {
    pub family: Family,
    pub tau: usize,
    base: CMatrix,
}

impl Codebook {
    pub fn from_sequences<V: AsRef<[C64]>>(family: Family, tau: usize, seqs: &[V]) -> Result<Self> {
        if seqs.is_empty() {
            return Err(invalid_param("codebook needs at least one sequence"));
        }
        let p = seqs[0].as_ref().len();
        if seqs.iter().any(|s| s.as_ref().len() != p) {
            return Err(invalid_param("base sequences differ in length"));
        }
        if p < 2 {
            return Err(invalid_param(format!("sequence length {p} < 2")));
        }
        if tau + 1 > p {
            return Err(invalid_param(format!("tau + 1 = {} exceeds sequence length {p}", tau + 1)));
        }
        Ok(Self { family, tau, base: CMatrix::from_columns(seqs) })
    }

    pub fn from_matrix(family: Family, tau: usize, base: CMatrix) -> Result<Self> {
        let cols: Vec<Vec<C64>> = base.columns().map(|c| c.to_vec()).collect();
        Self::from_sequences(family, tau, &cols)
    }

    pub fn alltop_gabor(p: usize, tau: usize) -> Result<Self> {
        check_tau(p, tau)?;
        let g = alltop_seed(p)?;
        Self::from_sequences(Family::AlltopGabor, tau, &gabor_user_sequences(&g, tau))
    }

    pub fn random_gabor<R: Rng + ?Sized>(p: usize, tau: usize, rng: &mut R) -> Result<Self> {
        check_tau(p, tau)?;
        let g = random_phase_seed(p, rng)?;
        Self::from_sequences(Family::RandomGabor, tau, &gabor_user_sequences(&g, tau))
    }

    /// `P` independent random-phase circulants, each split into users.
    pub fn random_block<R: Rng + ?Sized>(p: usize, tau: usize, rng: &mut R) -> Result<Self> {
        check_tau(p, tau)?;
        let seeds = (0..p).map(|_| random_phase_seed(p, rng)).collect::<Result<Vec<_>>>()?;
        Self::from_sequences(Family::RandomBlock, tau, &circulant_user_sequences(&seeds, tau))
    }

    /// `p = 2^m`; sequences have `p - 1` chips.
    pub fn kerdock(p: usize, tau: usize) -> Result<Self> {
        let m = kerdock_degree(p)?;
        if tau + 1 > p - 2 {
            return Err(invalid_param(format!("tau + 1 = {} exceeds Kerdock block width {}", tau + 1, p - 2)));
        }
        let blocks = kerdock_block_circulant(m)?;
        Self::from_sequences(Family::Kerdock, tau, &blocks.user_sequences(tau))
    }

    /// Builds any family; random families draw from `rng`.
    pub fn generate<R: Rng + ?Sized>(family: Family, p: usize, tau: usize, rng: &mut R) -> Result<Self> {
        match family {
            Family::AlltopGabor => Self::alltop_gabor(p, tau),
            Family::RandomGabor => Self::random_gabor(p, tau, rng),
            Family::RandomBlock => Self::random_block(p, tau, rng),
            Family::Kerdock => Self::kerdock(p, tau),
        }
    }

    /// Chips per base sequence (`P`).
    pub fn seq_len(&self) -> usize {
        self.base.rows()
    }

    pub fn n_sequences(&self) -> usize {
        self.base.cols()
    }

    pub fn prefix_len(&self) -> usize {
        self.tau + 1
    }

    /// `L = P + tau + 1`
    pub fn frame_len(&self) -> usize {
        self.seq_len() + self.tau + 1
    }

    pub fn base(&self) -> &CMatrix {
        &self.base
    }

    pub fn sequence(&self, n: usize) -> &[C64] {
        self.base.col(n)
    }

    /// Transmitted codeword of user `n` (base sequence plus cyclic prefix).
    pub fn codeword(&self, n: usize) -> Vec<C64> {
        cyclic_prefix_extend(self.sequence(n), self.tau).expect("tau checked at construction")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        if path.extension().is_some_and(|e| e == "json") {
            serde_json::to_writer(&mut w, &CodebookFile::from(self))?;
        } else {
            self.write_binary(&mut w)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads either container; the binary form is recognised by its magic.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        if bytes.starts_with(BINARY_MAGIC) {
            Self::read_binary(&mut bytes.as_slice())
        } else {
            let file: CodebookFile = serde_json::from_slice(&bytes)?;
            file.try_into()
        }
    }

    pub fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_u8(self.family.code())?;
        w.write_u32::<LittleEndian>(self.seq_len() as u32)?;
        w.write_u32::<LittleEndian>(self.tau as u32)?;
        w.write_u32::<LittleEndian>(self.n_sequences() as u32)?;
        for z in self.base.to_row_major() {
            w.write_f64::<LittleEndian>(z.re)?;
            w.write_f64::<LittleEndian>(z.im)?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(invalid_input("not a codebook container"));
        }
        let family = Family::from_code(r.read_u8()?)?;
        let p = r.read_u32::<LittleEndian>()? as usize;
        let tau = r.read_u32::<LittleEndian>()? as usize;
        let n = r.read_u32::<LittleEndian>()? as usize;
        let mut entries = Vec::with_capacity(p * n);
        for _ in 0..p * n {
            let re = r.read_f64::<LittleEndian>()?;
            let im = r.read_f64::<LittleEndian>()?;
            entries.push(C64::new(re, im));
        }
        Self::from_matrix(family, tau, CMatrix::from_row_major(p, n, &entries))
    }
}

fn check_tau(p: usize, tau: usize) -> Result<()> {
    if tau + 1 > p {
        return Err(invalid_param(format!("tau + 1 = {} exceeds sequence length {p}", tau + 1)));
    }
    Ok(())
}

const BINARY_MAGIC: &[u8; 8] = b"CSMUDCB1";

/// JSON form of a codebook: entries row-major as `(re, im)` pairs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CodebookFile {
    pub family: Family,
    #[serde(rename = "P")]
    pub p: usize,
    pub tau: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub entries: Vec<(f64, f64)>,
}

impl From<&Codebook> for CodebookFile {
    fn from(cb: &Codebook) -> Self {
        Self {
            family: cb.family,
            p: cb.seq_len(),
            tau: cb.tau,
            n: cb.n_sequences(),
            entries: cb.base.to_row_major().into_iter().map(|z| (z.re, z.im)).collect(),
        }
    }
}

impl TryFrom<CodebookFile> for Codebook {
    type Error = Error;
    fn try_from(f: CodebookFile) -> Result<Self> {
        if f.entries.len() != f.p * f.n {
            return Err(invalid_input(format!(
                "codebook declares {}x{} but carries {} entries",
                f.p,
                f.n,
                f.entries.len()
            )));
        }
        let entries: Vec<C64> = f.entries.iter().map(|&(re, im)| C64::new(re, im)).collect();
        Codebook::from_matrix(f.family, f.tau, CMatrix::from_row_major(f.p, f.n, &entries))
    }
}

/// Block-circulant dictionary `A = [A_1 .. A_N]`, `A_n = [T_0 a_n .. T_tau a_n]`.
#[derive(Clone, Debug)]
pub struct ShiftDictionary {
    matrix: CMatrix,
    pub n_users: usize,
    pub tau: usize,
}

impl ShiftDictionary {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn seq_len(&self) -> usize {
        self.matrix.rows()
    }

    /// `N_tau = N (tau + 1)`
    pub fn n_cols(&self) -> usize {
        self.matrix.cols()
    }

    pub fn user_block(&self, n: usize) -> CMatrix {
        let idx: Vec<usize> = (0..=self.tau).map(|d| flat_index(n, d, self.tau)).collect();
        self.matrix.select_columns(&idx)
    }

    /// The dictionary with every column scaled to unit norm.
    pub fn normalized(&self) -> CMatrix {
        let mut m = self.matrix.clone();
        m.normalize_columns();
        m
    }

    /// Base sequence of each user (column `d = 0` of its block).
    pub fn base_sequences(&self) -> Vec<&[C64]> {
        (0..self.n_users).map(|n| self.matrix.col(flat_index(n, 0, self.tau))).collect()
    }
}

/// Lays out the first `n_users` base sequences with all shifts `0..=tau`.
pub fn build_shift_dictionary(codebook: &Codebook, tau: usize, n_users: usize) -> Result<ShiftDictionary> {
    if tau > codebook.tau {
        return Err(invalid_param(format!("codebook laid out for tau <= {}, requested tau = {tau}", codebook.tau)));
    }
    if n_users > codebook.n_sequences() {
        return Err(invalid_param(format!(
            "N = {n_users} exceeds capacity {} of this codebook",
            codebook.n_sequences()
        )));
    }
    let mut cols = Vec::with_capacity(n_users * (tau + 1));
    for n in 0..n_users {
        let a = codebook.sequence(n);
        for d in 0..=tau {
            cols.push(cyclic_shift(a, d));
        }
    }
    let matrix = if cols.is_empty() { CMatrix::zeros(codebook.seq_len(), 0) } else { CMatrix::from_columns(&cols) };
    Ok(ShiftDictionary { matrix, n_users, tau })
}
