//! Activation allocation auditor.
//!
//! Counts live tensor elements per thread. Every `SeqTensor` registers its
//! element count on construction and deregisters on drop, so peak live
//! elements measure activation memory deterministically, independent of the
//! OS allocator. Counting is always on; it is a pair of thread-local adds.
//!
//! Accounting is meaningful when a tensor is dropped on the thread that
//! created it, which holds on every measurement path (benchmarks pin to one
//! thread). Tensors moved across threads decrement with saturation instead
//! of corrupting the counter.

use std::cell::Cell;

thread_local! {
    static LIVE: Cell<u64> = const { Cell::new(0) };
    static PEAK: Cell<u64> = const { Cell::new(0) };
    static TOTAL: Cell<u64> = const { Cell::new(0) };
}

pub(crate) fn register(elems: usize) {
    TOTAL.with(|t| t.set(t.get() + elems as u64));
    LIVE.with(|l| {
        let v = l.get() + elems as u64;
        l.set(v);
        PEAK.with(|p| {
            if v > p.get() {
                p.set(v);
            }
        });
    });
}

pub(crate) fn unregister(elems: usize) {
    LIVE.with(|l| l.set(l.get().saturating_sub(elems as u64)));
}

/// Currently live tensor elements on this thread.
pub fn live_elements() -> u64 {
    LIVE.with(|l| l.get())
}

/// Peak live tensor elements on this thread since the last reset.
pub fn peak_elements() -> u64 {
    PEAK.with(|p| p.get())
}

/// Monotone count of all tensor elements ever allocated on this thread.
pub fn total_allocated() -> u64 {
    TOTAL.with(|t| t.get())
}

/// Resets the peak to the current live count.
pub fn reset_peak() {
    let live = live_elements();
    PEAK.with(|p| p.set(live));
}

/// Runs `f` and returns its peak live-element count relative to the live
/// count at entry (the activation footprint of the region).
pub fn measure_region<T>(f: impl FnOnce() -> T) -> (T, u64) {
    let base = live_elements();
    reset_peak();
    let out = f();
    let peak = peak_elements();
    (out, peak - base)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeqTensor;

    #[test]
    fn region_counts_allocations() {
        let (_, peak) = measure_region(|| {
            let a = SeqTensor::zeros(10, 10);
            let b = SeqTensor::zeros(5, 4);
            (a, b)
        });
        assert_eq!(peak, 120);
    }

    #[test]
    fn dropped_tensors_release() {
        let before = live_elements();
        {
            let _t = SeqTensor::zeros(7, 3);
            assert_eq!(live_elements(), before + 21);
        }
        assert_eq!(live_elements(), before);
    }
}
