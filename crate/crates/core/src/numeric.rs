//! Half-precision values and the 16x16x16 fragment multiply-accumulate.
//!
//! The fragment contract mirrors a mixed-precision matrix unit: operands are
//! stored at operand precision, every product is formed exactly in `f32`
//! (a binary16 x binary16 product always fits in binary32), and products are
//! accumulated in `f32` in ascending `k` order without fused multiply-add.

use std::fmt;

/// Fragment edge length (rows, columns and reduction depth).
pub const FRAG: usize = 16;

/// Canonical quiet NaN produced for every NaN input.
pub const HALF_NAN_BITS: u16 = 0x7E00;

/// IEEE 754 binary16 value stored as its raw bit pattern.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Half(u16);

impl Half {
    pub const ZERO: Half = Half(0);
    pub const ONE: Half = Half(0x3C00);
    pub const INFINITY: Half = Half(0x7C00);
    pub const NEG_INFINITY: Half = Half(0xFC00);
    pub const MAX: Half = Half(0x7BFF);

    pub const fn from_bits(bits: u16) -> Self {
        Half(bits)
    }

    pub const fn to_bits(self) -> u16 {
        self.0
    }

    pub fn from_f32(x: f32) -> Self {
        f32_to_f16(x)
    }

    pub fn to_f32(self) -> f32 {
        f16_to_f32(self)
    }

    pub fn is_nan(self) -> bool {
        self.0 & 0x7C00 == 0x7C00 && self.0 & 0x03FF != 0
    }

    pub fn is_finite(self) -> bool {
        self.0 & 0x7C00 != 0x7C00
    }
}

impl fmt::Debug for Half {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Half({:#06x} = {})", self.0, self.to_f32())
    }
}

impl fmt::Display for Half {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.to_f32(), f)
    }
}

/// Round-to-nearest-even narrowing with subnormals, signed overflow to
/// infinity and NaN canonicalized to [`HALF_NAN_BITS`].
pub fn f32_to_f16(x: f32) -> Half {
    if x.is_nan() {
        return Half(HALF_NAN_BITS);
    }
    Half(half::f16::from_f32(x).to_bits())
}

/// Exact widening. NaN patterns widen to the canonical `f32` quiet NaN.
pub fn f16_to_f32(h: Half) -> f32 {
    if h.is_nan() {
        return f32::NAN;
    }
    half::f16::from_bits(h.0).to_f32()
}

/// Element type a fragment can hold. `f32` operands pass through unchanged,
/// `Half` operands are rounded on the way in.
pub trait Operand: Copy + Default + PartialEq + fmt::Debug + Send + Sync + 'static {
    const ZERO: Self;

    fn quantize(x: f32) -> Self;

    fn widen(self) -> f32;
}

impl Operand for f32 {
    const ZERO: Self = 0.0;

    #[inline(always)]
    fn quantize(x: f32) -> Self {
        x
    }

    #[inline(always)]
    fn widen(self) -> f32 {
        self
    }
}

impl Operand for Half {
    const ZERO: Self = Half(0);

    #[inline(always)]
    fn quantize(x: f32) -> Self {
        f32_to_f16(x)
    }

    #[inline(always)]
    fn widen(self) -> f32 {
        f16_to_f32(self)
    }
}

/// Row-major 16x16 block of operands. Used for the Gaussian-side operand
/// (row `g` = one Gaussian's padded coefficients) and the pixel-side operand
/// (`get(k, p)` = basis lane `k` of pixel column `p`).
#[derive(Clone, PartialEq)]
pub struct Fragment<T: Operand> {
    data: [[T; FRAG]; FRAG],
}

/// Gaussian-side operand: row `g` holds `[-a/2, -b, -c/2, 0, ...]`.
pub type FragmentA<T = Half> = Fragment<T>;
/// Pixel-side operand: column `p` holds `[dx^2, dx*dy, dy^2, 0, ...]`.
pub type FragmentB<T = Half> = Fragment<T>;

impl<T: Operand> Default for Fragment<T> {
    fn default() -> Self {
        Self::zeros()
    }
}

impl<T: Operand> fmt::Debug for Fragment<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.data.iter()).finish()
    }
}

impl<T: Operand> Fragment<T> {
    pub fn zeros() -> Self {
        Fragment {
            data: [[T::ZERO; FRAG]; FRAG],
        }
    }

    #[inline(always)]
    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row][col]
    }

    #[inline(always)]
    pub fn set(&mut self, row: usize, col: usize, v: T) {
        self.data[row][col] = v;
    }

    pub fn row(&self, row: usize) -> &[T; FRAG] {
        &self.data[row]
    }

    /// Writes the three leading lanes of row `row`; lanes 3.. are zeroed.
    pub fn set_row_terms(&mut self, row: usize, terms: [T; 3]) {
        let r = &mut self.data[row];
        r[..3].copy_from_slice(&terms);
        r[3..].fill(T::ZERO);
    }

    /// Writes the three leading lanes of column `col`; lanes 3.. are zeroed.
    pub fn set_col_terms(&mut self, col: usize, terms: [T; 3]) {
        for (k, row) in self.data.iter_mut().enumerate() {
            row[col] = if k < 3 { terms[k] } else { T::ZERO };
        }
    }

    pub fn clear_row(&mut self, row: usize) {
        self.data[row].fill(T::ZERO);
    }

    /// True when every lane at index >= 3 along the reduction dimension is
    /// zero. `reduction_on_cols` selects A layout (lanes are columns).
    pub fn padding_is_zero(&self, reduction_on_cols: bool) -> bool {
        (0..FRAG).all(|i| {
            (3..FRAG).all(|k| {
                let v = if reduction_on_cols {
                    self.data[i][k]
                } else {
                    self.data[k][i]
                };
                v.widen() == 0.0
            })
        })
    }
}

/// 16x16 single-precision accumulator block.
#[derive(Clone, PartialEq)]
pub struct FragmentC {
    pub values: [[f32; FRAG]; FRAG],
}

impl Default for FragmentC {
    fn default() -> Self {
        FragmentC {
            values: [[0.0; FRAG]; FRAG],
        }
    }
}

impl fmt::Debug for FragmentC {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.values.iter()).finish()
    }
}

/// One output entry of the fragment multiply: `acc + sum_k a(g,k) * b(k,p)`
/// with exact `f32` products accumulated in ascending `k`.
#[inline(always)]
pub fn fragment_dot<T: Operand>(a: &Fragment<T>, g: usize, b: &Fragment<T>, p: usize, acc: f32) -> f32 {
    let row = &a.data[g];
    let mut acc = acc;
    for k in 0..FRAG {
        // Separate multiply and add: no contraction into an FMA.
        let prod = row[k].widen() * b.data[k][p].widen();
        acc += prod;
    }
    acc
}

/// `c' = c + A * B` over the full 16x16x16 block.
pub fn fragment_mma<T: Operand>(a: &Fragment<T>, b: &Fragment<T>, c: &FragmentC) -> FragmentC {
    let mut out = FragmentC::default();
    for g in 0..FRAG {
        for p in 0..FRAG {
            out.values[g][p] = fragment_dot(a, g, b, p, c.values[g][p]);
        }
    }
    out
}

/// Widened copy of a fragment. Exact, because widening is lossless.
pub fn widen_fragment<T: Operand>(f: &Fragment<T>) -> [[f32; FRAG]; FRAG] {
    f.data.map(|row| row.map(Operand::widen))
}

/// Row `g` of `A * B` on widened operands: `acc[p] += a_row[k] * b[k][p]`
/// for `k` ascending. Each output sees the same operation sequence as
/// [`fragment_dot`], so results are identical; only the loop nest differs.
#[inline]
pub fn row_product(a_row: &[f32; FRAG], b: &[[f32; FRAG]; FRAG], acc: &mut [f32; FRAG]) {
    for k in 0..FRAG {
        let a = a_row[k];
        let b_row = &b[k];
        for p in 0..FRAG {
            let prod = a * b_row[p];
            acc[p] += prod;
        }
    }
}

/// Ordered three-term reduction `((q0*f0) + (q1*f1)) + (q2*f2)` over widened
/// operands. This is the unpadded value the fragment path must reproduce.
#[inline(always)]
pub fn three_term<T: Operand>(q: [T; 3], phi: [T; 3]) -> f32 {
    let t0 = q[0].widen() * phi[0].widen();
    let t1 = q[1].widen() * phi[1].widen();
    let t2 = q[2].widen() * phi[2].widen();
    (t0 + t1) + t2
}

/// Value equality at zero ULP: identical bits, or both zero (the padded
/// reduction starts from `+0` so a `-0` three-term result comes back as `+0`),
/// or both NaN.
pub fn same_value(x: f32, y: f32) -> bool {
    x.to_bits() == y.to_bits() || (x == 0.0 && y == 0.0) || (x.is_nan() && y.is_nan())
}
