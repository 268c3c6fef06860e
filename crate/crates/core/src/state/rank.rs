use crate::exact::CycNum;

/// Rank of a matrix over ℚ(ζ₈) by fraction-free (Bareiss) elimination.
///
/// Each update is `(p·m[i][j] − m[i][c]·m[r][j]) / prev`, where `prev` is the
/// previous pivot; zero columns are skipped, so the result is exact for any
/// shape.
pub fn rank(mut m: Vec<Vec<CycNum>>) -> usize {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    debug_assert!(m.iter().all(|r| r.len() == cols));
    let mut prev_inv = CycNum::one();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let (top, bottom) = m.split_at_mut(r + 1);
        let pivot_row = &top[r];
        let pivot = &pivot_row[c];
        for row in bottom.iter_mut() {
            let lead = std::mem::take(&mut row[c]);
            for j in (c + 1)..cols {
                let upd = pivot * &row[j] - &lead * &pivot_row[j];
                row[j] = if prev_inv.is_one() { upd } else { upd * &prev_inv };
            }
        }
        prev_inv = pivot.inv().expect("pivot is nonzero");
        r += 1;
    }
    r
}
