use crate::error::{Error, Result};

/// One splat's effective contribution at a pixel: its view depth, its
/// effective opacity `α·w` (already clamped if the caller wants clamping) and
/// its color.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contribution {
    pub depth: f64,
    pub alpha: f64,
    pub color: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferencePixel {
    pub color: [f64; 3],
    pub alpha: f64,
}

/// Direct evaluation of `C = Σ_k c_k a_k Π_{l<k} (1 - a_l)` for a front-to-back
/// list. No tiling, no truncation of the product.
pub fn composite_reference(contributions: &[Contribution]) -> Result<ReferencePixel> {
    if contributions.windows(2).any(|w| w[1].depth < w[0].depth) {
        return Err(Error::UnsortedContributions);
    }
    let mut color = [0.0; 3];
    for (k, c) in contributions.iter().enumerate() {
        let transmittance: f64 = contributions[..k].iter().map(|l| 1.0 - l.alpha).product();
        for ch in 0..3 {
            color[ch] += c.color[ch] * c.alpha * transmittance;
        }
    }
    let alpha = 1.0 - contributions.iter().map(|l| 1.0 - l.alpha).product::<f64>();
    Ok(ReferencePixel { color, alpha })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_opaque_term_returns_its_color() {
        let px = composite_reference(&[Contribution {
            depth: 1.0,
            alpha: 1.0,
            color: [0.2, 0.4, 0.6],
        }])
        .unwrap();
        assert_eq!(px.color, [0.2, 0.4, 0.6]);
        assert_eq!(px.alpha, 1.0);
    }

    #[test]
    fn transparent_terms_vanish() {
        let terms: Vec<_> = (0..5)
            .map(|i| Contribution {
                depth: i as f64,
                alpha: 0.0,
                color: [1.0, 1.0, 1.0],
            })
            .collect();
        let px = composite_reference(&terms).unwrap();
        assert_eq!(px.color, [0.0; 3]);
        assert_eq!(px.alpha, 0.0);
    }

    #[test]
    fn unsorted_is_rejected() {
        let a = Contribution {
            depth: 2.0,
            alpha: 0.5,
            color: [1.0, 0.0, 0.0],
        };
        let b = Contribution { depth: 1.0, ..a };
        assert!(matches!(
            composite_reference(&[a, b]),
            Err(Error::UnsortedContributions)
        ));
    }

    #[test]
    fn front_over_back_by_hand() {
        let front = Contribution {
            depth: 1.0,
            alpha: 0.5,
            color: [1.0, 0.0, 0.0],
        };
        let back = Contribution {
            depth: 2.0,
            alpha: 0.99,
            color: [0.0, 0.0, 1.0],
        };
        let px = composite_reference(&[front, back]).unwrap();
        assert_eq!(px.color, [0.5, 0.0, 0.5 * 0.99]);
    }
}
