//! Label erasure with jump recomputation, shared by the two assembly-level
//! languages.

pub(crate) trait JumpCode: Clone {
    fn is_nop(&self) -> bool;
    fn offset(&self) -> Option<i64>;
    fn with_offset(&self, k: i64) -> Self;
}

/// Removes every nop and rewrites branch offsets so that each jump keeps
/// its target (a jump onto a removed nop lands on the next kept instruction).
///
/// An offset `k` at position `i` becomes `k - n(i, i+k)` when `k >= 0` and
/// `k + n(i+1+k, i)` otherwise, where `n(a, b)` counts nops in `[a, b]`.
pub(crate) fn erase<I: JumpCode>(code: &[I]) -> Vec<I> {
    // before[j] = number of nops in positions [0, j)
    let mut before = Vec::with_capacity(code.len() + 1);
    before.push(0i64);
    for ins in code {
        let last = *before.last().unwrap();
        before.push(last + i64::from(ins.is_nop()));
    }
    let len = code.len() as i64;
    let count = |a: i64, b: i64| -> i64 {
        let lo = a.clamp(0, len);
        let hi = (b + 1).clamp(0, len);
        if hi <= lo {
            0
        } else {
            before[hi as usize] - before[lo as usize]
        }
    };
    code.iter()
        .enumerate()
        .filter(|(_, ins)| !ins.is_nop())
        .map(|(i, ins)| match ins.offset() {
            Some(k) => {
                let i = i as i64;
                let k2 = if k >= 0 {
                    k - count(i, i + k)
                } else {
                    k + count(i + 1 + k, i)
                };
                ins.with_offset(k2)
            }
            None => ins.clone(),
        })
        .collect()
}
