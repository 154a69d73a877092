//! Bounded parallel mapping that preserves input order.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Applies `f` to every item with at most `limit` invocations in flight and
/// returns the results in input order, no matter in which order the workers
/// finish. `limit` of zero is treated as one.
pub fn map_bounded<T, R, F>(items: &[T], limit: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    let workers = limit.max(1).min(items.len());
    if workers <= 1 {
        return items.iter().enumerate().map(|(i, item)| f(i, item)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= items.len() {
                    break;
                }
                let out = f(i, &items[i]);
                slots.lock().unwrap()[i] = Some(out);
            });
        }
    });
    let mut slots = slots.into_inner().unwrap();
    slots.iter_mut().map(|s| s.take().expect("worker filled every slot")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::time::Duration;

    #[test]
    fn preserves_input_order_under_uneven_delays() {
        let items: Vec<usize> = (0..100).collect();
        let out = map_bounded(&items, 8, |i, &x| {
            // Later items finish earlier; order must still match input.
            std::thread::sleep(Duration::from_micros(((x * 37) % 50) as u64));
            i * 10 + x % 10
        });
        let expected: Vec<usize> = (0..100).map(|i| i * 10 + i % 10).collect();
        assert_eq!(out, expected);
    }

    #[test]
    fn bounds_concurrent_invocations() {
        let live = AtomicUsize::new(0);
        let peak = AtomicUsize::new(0);
        let items: Vec<usize> = (0..64).collect();
        map_bounded(&items, 4, |_, _| {
            let now = live.fetch_add(1, Ordering::SeqCst) + 1;
            peak.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(Duration::from_millis(1));
            live.fetch_sub(1, Ordering::SeqCst);
        });
        assert!(peak.load(Ordering::SeqCst) <= 4);
    }

    #[test]
    fn zero_limit_runs_serially() {
        let items = vec![1, 2, 3];
        let out = map_bounded(&items, 0, |_, &x| x * 2);
        assert_eq!(out, vec![2, 4, 6]);
    }
}
