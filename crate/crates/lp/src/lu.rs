//! Sparse LU factorisation of simplex bases with product-form updates.
//!
//! Elimination is right-looking with singleton detection first and a
//! Markowitz search with threshold pivoting for the remaining bump. Rows are
//! constraint rows, columns are basis positions.

const ABS_PIVOT_TOL: f64 = 1e-11;
const THRESHOLD: f64 = 0.01;
const MARKOWITZ_CANDIDATES: usize = 4;

/// Rows and basis positions left without a pivot by a failed factorisation.
#[derive(Debug, Clone)]
pub(crate) struct Singular {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

#[derive(Debug, Clone, Default)]
struct LuFactors {
    m: usize,
    piv_row: Vec<usize>,
    piv_col: Vec<usize>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
    u_diag: Vec<f64>,
}

#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

/// `B^{-1}` represented as `E_k ... E_1 (LU)^{-1}`.
#[derive(Debug, Clone, Default)]
pub(crate) struct BasisFactor {
    lu: LuFactors,
    etas: Vec<Eta>,
    work: Vec<f64>,
}

impl BasisFactor {
    /// Factorises the basis whose column at position `k` is `cols[k]`.
    pub fn factorize(m: usize, cols: &[Vec<(usize, f64)>]) -> Result<Self, Singular> {
        let lu = factorize(m, cols)?;
        Ok(BasisFactor {
            lu,
            etas: Vec::new(),
            work: vec![0.0; m],
        })
    }

    pub fn num_updates(&self) -> usize {
        self.etas.len()
    }

    /// Solves `B x = b`. `b` is indexed by row and is consumed; `x` by position.
    pub fn ftran(&mut self, b: &mut [f64], x: &mut [f64]) {
        let lu = &self.lu;
        for k in 0..lu.m {
            let v = b[lu.piv_row[k]];
            if v != 0.0 {
                for e in lu.l_start[k]..lu.l_start[k + 1] {
                    b[lu.l_idx[e]] -= lu.l_val[e] * v;
                }
            }
        }
        for k in (0..lu.m).rev() {
            let mut v = b[lu.piv_row[k]];
            for e in lu.u_start[k]..lu.u_start[k + 1] {
                v -= lu.u_val[e] * x[lu.u_idx[e]];
            }
            x[lu.piv_col[k]] = v / lu.u_diag[k];
        }
        for eta in &self.etas {
            let xp = x[eta.pos] / eta.pivot;
            x[eta.pos] = xp;
            if xp != 0.0 {
                for &(i, a) in &eta.entries {
                    x[i] -= a * xp;
                }
            }
        }
    }

    /// Solves `B' y = c`. `c` is indexed by position and is consumed; `y` by row.
    pub fn btran(&mut self, c: &mut [f64], y: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            let mut v = c[eta.pos];
            for &(i, a) in &eta.entries {
                v -= a * c[i];
            }
            c[eta.pos] = v / eta.pivot;
        }
        let lu = &self.lu;
        let z = &mut self.work;
        z.iter_mut().for_each(|v| *v = 0.0);
        for k in 0..lu.m {
            let zr = c[lu.piv_col[k]] / lu.u_diag[k];
            z[lu.piv_row[k]] = zr;
            if zr != 0.0 {
                for e in lu.u_start[k]..lu.u_start[k + 1] {
                    c[lu.u_idx[e]] -= lu.u_val[e] * zr;
                }
            }
        }
        for k in (0..lu.m).rev() {
            let mut s = 0.0;
            for e in lu.l_start[k]..lu.l_start[k + 1] {
                s += lu.l_val[e] * z[lu.l_idx[e]];
            }
            z[lu.piv_row[k]] -= s;
        }
        y.copy_from_slice(z);
    }

    /// Records the replacement of the column at `pos` given `alpha = B^{-1} a_q`.
    pub fn update(&mut self, pos: usize, alpha: &[f64]) {
        let entries: Vec<(usize, f64)> = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &a)| i != pos && a != 0.0)
            .map(|(i, &a)| (i, a))
            .collect();
        self.etas.push(Eta {
            pos,
            pivot: alpha[pos],
            entries,
        });
    }
}

fn factorize(m: usize, cols: &[Vec<(usize, f64)>]) -> Result<LuFactors, Singular> {
    debug_assert_eq!(cols.len(), m);
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (j, col) in cols.iter().enumerate() {
        for &(i, v) in col {
            if v != 0.0 {
                rows[i].push((j, v));
                col_rows[j].push(i);
            }
        }
    }
    let mut col_count: Vec<usize> = col_rows.iter().map(|c| c.len()).collect();
    let mut row_done = vec![false; m];
    let mut col_done = vec![false; m];
    let mut col_single: Vec<usize> = (0..m).rev().filter(|&j| col_count[j] == 1).collect();
    let mut row_single: Vec<usize> = (0..m).rev().filter(|&i| rows[i].len() == 1).collect();
    let mut marker: Vec<usize> = vec![usize::MAX; m];

    let mut f = LuFactors {
        m,
        l_start: vec![0],
        u_start: vec![0],
        ..Default::default()
    };

    for _step in 0..m {
        let pivot = find_pivot(
            &rows,
            &col_rows,
            &col_count,
            &row_done,
            &col_done,
            &mut col_single,
            &mut row_single,
        );
        let Some((r, c)) = pivot else {
            return Err(Singular {
                rows: (0..m).filter(|&i| !row_done[i]).collect(),
                cols: (0..m).filter(|&j| !col_done[j]).collect(),
            });
        };
        let prow = std::mem::take(&mut rows[r]);
        let pv = prow.iter().find(|e| e.0 == c).map(|e| e.1).unwrap_or(0.0);
        f.piv_row.push(r);
        f.piv_col.push(c);
        f.u_diag.push(pv);
        for &(j, v) in &prow {
            if j != c {
                f.u_idx.push(j);
                f.u_val.push(v);
            }
        }
        f.u_start.push(f.u_idx.len());
        row_done[r] = true;
        col_done[c] = true;

        let others = std::mem::take(&mut col_rows[c]);
        for &i in &others {
            if row_done[i] {
                continue;
            }
            let row_i = &mut rows[i];
            let Some(at) = row_i.iter().position(|e| e.0 == c) else {
                continue;
            };
            let l = row_i[at].1 / pv;
            row_i.swap_remove(at);
            f.l_idx.push(i);
            f.l_val.push(l);
            for (k, &(j, _)) in row_i.iter().enumerate() {
                marker[j] = k;
            }
            for &(j, v) in &prow {
                if j == c {
                    continue;
                }
                let k = marker[j];
                if k != usize::MAX {
                    row_i[k].1 -= l * v;
                } else {
                    row_i.push((j, -l * v));
                    col_rows[j].push(i);
                    col_count[j] += 1;
                }
            }
            for &(j, _) in row_i.iter() {
                marker[j] = usize::MAX;
            }
            if row_i.len() == 1 {
                row_single.push(i);
            }
        }
        f.l_start.push(f.l_idx.len());
        for &(j, _) in &prow {
            if j != c {
                col_count[j] -= 1;
                if col_count[j] == 1 {
                    col_single.push(j);
                }
            }
        }
        col_count[c] = 0;
    }
    Ok(f)
}

fn find_pivot(
    rows: &[Vec<(usize, f64)>],
    col_rows: &[Vec<usize>],
    col_count: &[usize],
    row_done: &[bool],
    col_done: &[bool],
    col_single: &mut Vec<usize>,
    row_single: &mut Vec<usize>,
) -> Option<(usize, usize)> {
    let entry = |i: usize, j: usize| -> f64 { rows[i].iter().find(|e| e.0 == j).map(|e| e.1).unwrap_or(0.0) };
    while let Some(j) = col_single.pop() {
        if col_done[j] || col_count[j] != 1 {
            continue;
        }
        if let Some(&i) = col_rows[j].iter().find(|&&i| !row_done[i] && entry(i, j) != 0.0) {
            if entry(i, j).abs() > ABS_PIVOT_TOL {
                return Some((i, j));
            }
        }
    }
    while let Some(i) = row_single.pop() {
        if row_done[i] || rows[i].len() != 1 {
            continue;
        }
        let (j, v) = rows[i][0];
        if col_done[j] || v.abs() <= ABS_PIVOT_TOL {
            continue;
        }
        let colmax = col_max(rows, col_rows, row_done, j);
        if v.abs() >= THRESHOLD * colmax {
            return Some((i, j));
        }
    }
    // Markowitz search over the sparsest active columns.
    let mut cands: Vec<(usize, usize)> = Vec::with_capacity(MARKOWITZ_CANDIDATES + 1);
    for j in 0..col_count.len() {
        if col_done[j] || col_count[j] == 0 {
            continue;
        }
        let key = (col_count[j], j);
        if cands.len() < MARKOWITZ_CANDIDATES || key < *cands.last().unwrap() {
            let at = cands.partition_point(|k| *k < key);
            cands.insert(at, key);
            cands.truncate(MARKOWITZ_CANDIDATES);
        }
    }
    let mut best: Option<(usize, f64, usize, usize)> = None;
    for &(cnt, j) in &cands {
        let colmax = col_max(rows, col_rows, row_done, j);
        if colmax <= ABS_PIVOT_TOL {
            continue;
        }
        for &i in &col_rows[j] {
            if row_done[i] {
                continue;
            }
            let v = entry(i, j).abs();
            if v < THRESHOLD * colmax || v <= ABS_PIVOT_TOL {
                continue;
            }
            let cost = (rows[i].len() - 1) * (cnt - 1);
            let better = match best {
                None => true,
                Some((bc, bv, bi, bj)) => cost < bc || (cost == bc && (v > bv || (v == bv && (j, i) < (bj, bi)))),
            };
            if better {
                best = Some((cost, v, i, j));
            }
        }
    }
    if let Some((_, _, i, j)) = best {
        return Some((i, j));
    }
    // Fall back to the largest remaining entry anywhere.
    let mut fallback: Option<(f64, usize, usize)> = None;
    for j in 0..col_count.len() {
        if col_done[j] {
            continue;
        }
        for &i in &col_rows[j] {
            if row_done[i] {
                continue;
            }
            let v = entry(i, j).abs();
            if v > ABS_PIVOT_TOL && fallback.is_none_or(|(bv, _, _)| v > bv) {
                fallback = Some((v, i, j));
            }
        }
    }
    fallback.map(|(_, i, j)| (i, j))
}

fn col_max(rows: &[Vec<(usize, f64)>], col_rows: &[Vec<usize>], row_done: &[bool], j: usize) -> f64 {
    col_rows[j]
        .iter()
        .filter(|&&i| !row_done[i])
        .filter_map(|&i| rows[i].iter().find(|e| e.0 == j).map(|e| e.1.abs()))
        .fold(0.0, f64::max)
}
