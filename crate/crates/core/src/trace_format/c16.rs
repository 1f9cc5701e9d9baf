use num_complex::Complex64;

/// Scale of one Q15 least-significant bit.
pub const Q15_SCALE: f64 = 32768.0;

/// A packed complex sample: in-phase in the low 16 bits, quadrature in the
/// high 16 bits, both two's-complement Q15.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct C16Word(pub u32);

impl C16Word {
    pub fn from_iq(i: i16, q: i16) -> Self {
        C16Word((i as u16 as u32) | ((q as u16 as u32) << 16))
    }

    pub fn raw(self) -> u32 {
        self.0
    }

    pub fn i(self) -> i16 {
        self.0 as u16 as i16
    }

    pub fn q(self) -> i16 {
        (self.0 >> 16) as u16 as i16
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.i() as f64 / Q15_SCALE, self.q() as f64 / Q15_SCALE)
    }

    /// Quantizes a complex value to Q15 with round-to-nearest and
    /// saturation at the representable range.
    pub fn quantize(z: Complex64) -> Self {
        C16Word::from_iq(quantize_q15(z.re), quantize_q15(z.im))
    }
}

/// Decoded view of a packed word.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodedC16 {
    pub i: i16,
    pub q: i16,
    pub fi: f64,
    pub fq: f64,
}

pub fn decode_c16(word: u32) -> DecodedC16 {
    let w = C16Word(word);
    let (i, q) = (w.i(), w.q());
    DecodedC16 {
        i,
        q,
        fi: i as f64 / Q15_SCALE,
        fq: q as f64 / Q15_SCALE,
    }
}

pub fn encode_c16(i: i16, q: i16) -> u32 {
    C16Word::from_iq(i, q).raw()
}

pub(crate) fn quantize_q15(x: f64) -> i16 {
    let scaled = (x * Q15_SCALE).round();
    scaled.clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn decode_examples() {
        let d = decode_c16(0x0001_0002);
        assert_eq!((d.i, d.q), (2, 1));
        assert_eq!(d.fi, 2.0 / 32768.0);
        assert_eq!(d.fq, 1.0 / 32768.0);

        let d = decode_c16(0);
        assert_eq!((d.i, d.q, d.fi, d.fq), (0, 0, 0.0, 0.0));

        let d = decode_c16(0x8000_FFFF);
        assert_eq!((d.i, d.q), (-1, -32768));
        assert_eq!(d.fi, -1.0 / 32768.0);
        assert_eq!(d.fq, -1.0);
    }

    #[test]
    fn quantize_saturates() {
        assert_eq!(quantize_q15(1.0), i16::MAX);
        assert_eq!(quantize_q15(-1.0), i16::MIN);
        assert_eq!(quantize_q15(-3.0), i16::MIN);
        assert_eq!(quantize_q15(0.5), 16384);
    }

    proptest! {
        #[test]
        fn iq_roundtrip(i in any::<i16>(), q in any::<i16>()) {
            let d = decode_c16(encode_c16(i, q));
            prop_assert_eq!((d.i, d.q), (i, q));
            prop_assert!(d.fi.abs() <= 1.0 && d.fq.abs() <= 1.0);
        }

        #[test]
        fn word_bijection(w in any::<u32>()) {
            let d = decode_c16(w);
            prop_assert_eq!(encode_c16(d.i, d.q), w);
        }

        #[test]
        fn quantize_inverts_decode(w in any::<u32>()) {
            prop_assert_eq!(C16Word::quantize(C16Word(w).to_complex()), C16Word(w));
        }
    }
}
