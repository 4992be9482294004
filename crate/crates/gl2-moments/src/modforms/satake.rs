use num_complex::Complex64;

/// Root alpha of x^2 - A(p) x + 1, so A(p) = alpha + 1/alpha.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SatakePair {
    pub alpha: Complex64,
}

impl SatakePair {
    pub fn inverse(&self) -> Complex64 {
        1.0 / self.alpha
    }

    pub fn trace(&self) -> Complex64 {
        self.alpha + self.inverse()
    }
}

/// The root with nonnegative imaginary part (larger real part on ties).
pub fn satake(ap: Complex64) -> SatakePair {
    let disc = (ap * ap - 4.0).sqrt();
    let r1 = (ap + disc) / 2.0;
    let r2 = (ap - disc) / 2.0;
    let pick = if (r1.im - r2.im).abs() > 1e-300 {
        if r1.im > r2.im { r1 } else { r2 }
    } else if r1.re >= r2.re {
        r1
    } else {
        r2
    };
    SatakePair { alpha: pick }
}
