//! Computational-basis conventions shared by every module.
//!
//! Site `i` (0-based) lives in bit `N - 1 - i` of a basis index, so site 0 is
//! the most significant bit and the first half of the chain is the row index
//! when an amplitude vector is reshaped to `2^{N/2} x 2^{N/2}`. Bit value 0 is
//! the `σ_z = +1` eigenstate.

#[inline]
pub fn site_mask(n_sites: usize, site: usize) -> usize {
    1usize << (n_sites - 1 - site)
}

#[inline]
pub fn dim(n_sites: usize) -> usize {
    1usize << n_sites
}

/// `σ_z` eigenvalue of `site` in basis state `s`.
#[inline]
pub fn z_value(n_sites: usize, site: usize, s: usize) -> f64 {
    if s & site_mask(n_sites, site) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Mask with every bit of the chain set; XOR with it is `⊗σ_x`.
#[inline]
pub fn all_mask(n_sites: usize) -> usize {
    dim(n_sites) - 1
}

/// Mask of the first `N/2` sites.
#[inline]
pub fn first_half_mask(n_sites: usize) -> usize {
    all_mask(n_sites) ^ (dim(n_sites - n_sites / 2) - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn site_zero_is_most_significant() {
        assert_eq!(site_mask(4, 0), 0b1000);
        assert_eq!(site_mask(4, 3), 0b0001);
        assert_eq!(first_half_mask(4), 0b1100);
        assert_eq!(first_half_mask(6), 0b111000);
        assert_eq!(z_value(2, 0, 0b10), -1.0);
    }
}
