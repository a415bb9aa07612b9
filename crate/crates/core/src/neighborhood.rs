//! Voxel neighborhoods on the 3D lattice.

/// Offsets of the 6-, 18- or 26-neighborhood, in z-major, y, x order.
///
/// A displacement belongs to the n-neighborhood when the number of nonzero
/// components is at most 1 (6), 2 (18) or 3 (26).
pub fn offsets(connectivity: u8) -> Vec<[i32; 3]> {
    let max_nonzero = match connectivity {
        6 => 1,
        18 => 2,
        26 => 3,
        other => panic!("unsupported connectivity {other}"),
    };
    let mut out = Vec::with_capacity(connectivity as usize);
    for dz in -1..=1 {
        for dy in -1..=1 {
            for dx in -1i32..=1 {
                let nonzero = [dx, dy, dz].iter().filter(|&&d| d != 0).count();
                if nonzero > 0 && nonzero <= max_nonzero {
                    out.push([dx, dy, dz]);
                }
            }
        }
    }
    out
}

/// Applies `off` to `p` if the result stays inside `dims`.
#[inline]
pub fn shifted(p: [usize; 3], off: [i32; 3], dims: [usize; 3]) -> Option<[usize; 3]> {
    let mut out = [0usize; 3];
    for a in 0..3 {
        let v = p[a] as i64 + off[a] as i64;
        if v < 0 || v >= dims[a] as i64 {
            return None;
        }
        out[a] = v as usize;
    }
    Some(out)
}
