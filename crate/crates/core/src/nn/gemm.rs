//! Thin safe wrapper over `matrixmultiply::sgemm` plus a deterministic
//! work-splitting helper for intra-batch parallelism.

/// C = alpha * op(A) * op(B) + beta * C for row-major slices.
///
/// `a` is `m x k` (or `k x m` when `a_trans`), `b` is `k x n` (or `n x k`
/// when `b_trans`), `c` is `m x n`. Transposition is expressed through
/// strides, so no copies are made.
pub(crate) fn sgemm(
    m: usize,
    k: usize,
    n: usize,
    alpha: f32,
    a: &[f32],
    a_trans: bool,
    b: &[f32],
    b_trans: bool,
    beta: f32,
    c: &mut [f32],
) {
    assert_eq!(a.len(), m * k, "gemm: A size");
    assert_eq!(b.len(), k * n, "gemm: B size");
    assert_eq!(c.len(), m * n, "gemm: C size");
    let (rsa, csa) = if a_trans {
        (1, m as isize)
    } else {
        (k as isize, 1)
    };
    let (rsb, csb) = if b_trans {
        (1, k as isize)
    } else {
        (n as isize, 1)
    };
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            alpha,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Applies `f` to equally sized chunks of `data`, possibly on several threads.
///
/// Each chunk is an independent unit of work writing only its own slice, so
/// the result is bit-identical regardless of how many threads run. Chunks are
/// dealt to threads round-robin.
pub(crate) fn for_each_chunk<T, F>(data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync,
{
    if data.is_empty() || chunk_len == 0 {
        return;
    }
    let n_chunks = data.len().div_ceil(chunk_len);
    let threads = crate::worker_threads().min(n_chunks).max(1);
    if threads == 1 {
        for (i, chunk) in data.chunks_mut(chunk_len).enumerate() {
            f(i, chunk);
        }
        return;
    }
    let mut groups: Vec<Vec<(usize, &mut [T])>> = (0..threads).map(|_| Vec::new()).collect();
    for (i, chunk) in data.chunks_mut(chunk_len).enumerate() {
        groups[i % threads].push((i, chunk));
    }
    std::thread::scope(|scope| {
        for group in groups {
            let f = &f;
            scope.spawn(move || {
                for (i, chunk) in group {
                    f(i, chunk);
                }
            });
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_matches_naive() {
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]; // 2x3
        let b = [7.0, 8.0, 9.0, 10.0, 11.0, 12.0]; // 3x2
        let mut c = [0.0f32; 4];
        sgemm(2, 3, 2, 1.0, &a, false, &b, false, 0.0, &mut c);
        assert_eq!(c, [58.0, 64.0, 139.0, 154.0]);
    }

    #[test]
    fn gemm_transposed_operands() {
        // A^T where A stored as 3x2: effective 2x3 = [[1,3,5],[2,4,6]]
        let a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let b = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0]; // 3x2
        let mut c = [0.0f32; 4];
        sgemm(2, 3, 2, 1.0, &a, true, &b, false, 0.0, &mut c);
        assert_eq!(c, [1.0 + 5.0, 3.0 + 5.0, 2.0 + 6.0, 4.0 + 6.0]);
    }

    #[test]
    fn chunked_apply_is_thread_count_invariant() {
        let run = |threads: usize| {
            crate::set_max_threads(threads);
            let mut v = vec![0.0f32; 103];
            for_each_chunk(&mut v, 10, |i, chunk| {
                for (j, x) in chunk.iter_mut().enumerate() {
                    *x = (i * 1000 + j) as f32;
                }
            });
            crate::set_max_threads(0);
            v
        };
        assert_eq!(run(1), run(4));
    }
}
