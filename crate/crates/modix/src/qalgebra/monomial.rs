use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Gen {
    A,
    B,
    C,
    D,
}

impl Gen {
    pub const ALL: [Gen; 4] = [Gen::A, Gen::B, Gen::C, Gen::D];

    /// Doubled n-weight.
    pub fn wt2(self) -> i32 {
        match self {
            Gen::A | Gen::C => -1,
            Gen::B | Gen::D => 1,
        }
    }

    /// Doubled m-weight.
    pub fn wtl2(self) -> i32 {
        match self {
            Gen::A | Gen::B => -1,
            Gen::C | Gen::D => 1,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Gen::A => 'a',
            Gen::B => 'b',
            Gen::C => 'c',
            Gen::D => 'd',
        }
    }

    pub fn from_symbol(c: char) -> Option<Gen> {
        match c {
            'a' => Some(Gen::A),
            'b' => Some(Gen::B),
            'c' => Some(Gen::C),
            'd' => Some(Gen::D),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Branch {
    A,
    D,
}

/// PBW word `a^k b^m c^n` (A-branch) or `d^k b^m c^n`, `k >= 1` (D-branch).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Monomial {
    pub branch: Branch,
    pub k: u32,
    pub m: u32,
    pub n: u32,
}

impl Monomial {
    pub const ONE: Monomial = Monomial { branch: Branch::A, k: 0, m: 0, n: 0 };

    pub fn new(branch: Branch, k: u32, m: u32, n: u32) -> Self {
        assert!(branch == Branch::A || k >= 1, "D-branch monomial needs k >= 1");
        Self { branch, k, m, n }
    }

    pub fn a(k: u32, m: u32, n: u32) -> Self {
        Self::new(Branch::A, k, m, n)
    }

    pub fn d(k: u32, m: u32, n: u32) -> Self {
        Self::new(Branch::D, k, m, n)
    }

    pub fn gen(g: Gen) -> Self {
        match g {
            Gen::A => Self::a(1, 0, 0),
            Gen::B => Self::a(0, 1, 0),
            Gen::C => Self::a(0, 0, 1),
            Gen::D => Self::d(1, 0, 0),
        }
    }

    pub fn is_one(&self) -> bool {
        *self == Self::ONE
    }

    pub fn degree(&self) -> u32 {
        self.k + self.m + self.n
    }

    fn lead(&self) -> Gen {
        match self.branch {
            Branch::A => Gen::A,
            Branch::D => Gen::D,
        }
    }

    pub fn wt2(&self) -> i32 {
        self.k as i32 * self.lead().wt2() + self.m as i32 - self.n as i32
    }

    pub fn wtl2(&self) -> i32 {
        self.k as i32 * self.lead().wtl2() - self.m as i32 + self.n as i32
    }

    pub fn word(&self) -> Vec<Gen> {
        let mut w = Vec::with_capacity(self.degree() as usize);
        w.extend(std::iter::repeat(self.lead()).take(self.k as usize));
        w.extend(std::iter::repeat(Gen::B).take(self.m as usize));
        w.extend(std::iter::repeat(Gen::C).take(self.n as usize));
        w
    }

    /// Parse a word that contains no reducible pair.
    pub fn from_normal_word(w: &[Gen]) -> Option<Self> {
        let lead = w.first().copied().filter(|g| matches!(g, Gen::A | Gen::D));
        let k = w.iter().take_while(|g| Some(**g) == lead).count();
        let m = w[k..].iter().take_while(|g| **g == Gen::B).count();
        let n = w[k + m..].iter().take_while(|g| **g == Gen::C).count();
        if k + m + n != w.len() {
            return None;
        }
        let branch = if lead == Some(Gen::D) { Branch::D } else { Branch::A };
        Some(Self { branch, k: k as u32, m: m as u32, n: n as u32 })
    }

    fn with(&self, branch: Branch, k: u32, m: u32, n: u32) -> Self {
        if branch == Branch::D && k == 0 {
            Self { branch: Branch::A, k: 0, m, n }
        } else {
            Self { branch, k, m, n }
        }
    }

    /// `self * g` as a list of (q-exponent in units of s, monomial), from the
    /// commutation relations pushed through the normal word.
    pub fn times_gen(&self, g: Gen) -> Vec<(i32, Monomial)> {
        let (k, m, n) = (self.k, self.m, self.n);
        let mn = (m + n) as i32;
        match g {
            Gen::C => vec![(0, self.with(self.branch, k, m, n + 1))],
            Gen::B => vec![(0, self.with(self.branch, k, m + 1, n))],
            Gen::A => match self.branch {
                Branch::A => vec![(-2 * mn, self.with(Branch::A, k + 1, m, n))],
                Branch::D => vec![
                    (-2 * mn, self.with(Branch::D, k - 1, m, n)),
                    (-2 * mn - 2, self.with(Branch::D, k - 1, m + 1, n + 1)),
                ],
            },
            Gen::D => match self.branch {
                Branch::D => vec![(2 * mn, self.with(Branch::D, k + 1, m, n))],
                Branch::A if k == 0 => vec![(2 * mn, Self::d(1, m, n))],
                Branch::A => vec![
                    (2 * mn, self.with(Branch::A, k - 1, m, n)),
                    (2 * mn + 2, self.with(Branch::A, k - 1, m + 1, n + 1)),
                ],
            },
        }
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_one() {
            return write!(f, "1");
        }
        let parts = [(self.lead().symbol(), self.k), ('b', self.m), ('c', self.n)];
        for (sym, e) in parts {
            match e {
                0 => {}
                1 => write!(f, "{sym}")?,
                e => write!(f, "{sym}^{e}")?,
            }
        }
        Ok(())
    }
}
