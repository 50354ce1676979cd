//! Retry with exponential backoff, a token-bucket rate limiter and a shared
//! call budget.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryPolicy {
    /// Total attempts including the first.
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub multiplier: f64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 4,
            initial_backoff_ms: 500,
            multiplier: 2.0,
            max_backoff_ms: 30_000,
        }
    }
}

impl RetryPolicy {
    pub fn no_wait(max_attempts: u32) -> RetryPolicy {
        RetryPolicy {
            max_attempts,
            initial_backoff_ms: 0,
            multiplier: 1.0,
            max_backoff_ms: 0,
        }
    }

    /// Wait before attempt `attempt + 1`, for `attempt >= 1`.
    pub fn backoff(&self, attempt: u32) -> Duration {
        let ms = self.initial_backoff_ms as f64 * self.multiplier.powi(attempt.saturating_sub(1) as i32);
        Duration::from_millis(ms.min(self.max_backoff_ms as f64) as u64)
    }

    /// Runs `op` until it succeeds, fails with a non-retryable error, or the
    /// attempts run out. Returns the result and the number of attempts made.
    pub fn run<T, E>(
        &self,
        mut op: impl FnMut(u32) -> Result<T, E>,
        retryable: impl Fn(&E) -> bool,
    ) -> (Result<T, E>, u32) {
        let max = self.max_attempts.max(1);
        let mut attempt = 1;
        loop {
            match op(attempt) {
                Ok(v) => return (Ok(v), attempt),
                Err(e) if attempt < max && retryable(&e) => {
                    let wait = self.backoff(attempt);
                    log::debug!("attempt {attempt} failed, retrying in {wait:?}");
                    if !wait.is_zero() {
                        std::thread::sleep(wait);
                    }
                    attempt += 1;
                }
                Err(e) => return (Err(e), attempt),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateLimit {
    pub requests_per_second: f64,
    pub burst: u32,
}

#[derive(Debug)]
pub struct TokenBucket {
    rate: f64,
    capacity: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn new(limit: RateLimit) -> TokenBucket {
        let capacity = limit.burst.max(1) as f64;
        TokenBucket {
            rate: limit.requests_per_second.max(f64::MIN_POSITIVE),
            capacity,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    /// Blocks until a token is available and takes it.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut s = self.state.lock().expect("bucket lock");
                let now = Instant::now();
                s.0 = (s.0 + now.duration_since(s.1).as_secs_f64() * self.rate).min(self.capacity);
                s.1 = now;
                if s.0 >= 1.0 {
                    s.0 -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - s.0) / self.rate)
            };
            std::thread::sleep(wait);
        }
    }
}

/// Caps the number of provider calls across all threads.
#[derive(Debug, Default)]
pub struct CallBudget {
    cap: Option<u64>,
    used: AtomicU64,
}

impl CallBudget {
    pub fn new(cap: Option<u64>) -> CallBudget {
        CallBudget {
            cap,
            used: AtomicU64::new(0),
        }
    }

    pub fn cap(&self) -> Option<u64> {
        self.cap
    }

    pub fn used(&self) -> u64 {
        self.used.load(Ordering::SeqCst)
    }

    /// Reserves one call; false once the cap is reached.
    pub fn try_take(&self) -> bool {
        match self.cap {
            None => {
                self.used.fetch_add(1, Ordering::SeqCst);
                true
            }
            Some(cap) => self
                .used
                .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |u| (u < cap).then_some(u + 1))
                .is_ok(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backoff_grows_and_caps() {
        let p = RetryPolicy {
            max_attempts: 5,
            initial_backoff_ms: 100,
            multiplier: 2.0,
            max_backoff_ms: 300,
        };
        let ms: Vec<u128> = (1..=4).map(|a| p.backoff(a).as_millis()).collect();
        assert_eq!(ms, [100, 200, 300, 300]);
    }

    #[test]
    fn retries_only_retryable_errors() {
        let p = RetryPolicy::no_wait(3);
        let (r, n) = p.run(|a| if a < 2 { Err("busy") } else { Ok(a) }, |_| true);
        assert_eq!((r, n), (Ok(2), 2));
        let (r, n) = p.run(|_| Err::<(), _>("fatal"), |e| *e != "fatal");
        assert_eq!((r, n), (Err("fatal"), 1));
        let (r, n) = p.run(|_| Err::<(), _>("busy"), |_| true);
        assert_eq!((r, n), (Err("busy"), 3));
    }

    #[test]
    fn budget_caps_calls() {
        let b = CallBudget::new(Some(2));
        assert!(b.try_take() && b.try_take() && !b.try_take());
        assert_eq!(b.used(), 2);
        assert!(!CallBudget::new(Some(0)).try_take());
        let unlimited = CallBudget::new(None);
        assert!((0..100).all(|_| unlimited.try_take()));
    }

    #[test]
    fn bucket_allows_a_burst_then_throttles() {
        let bucket = TokenBucket::new(RateLimit {
            requests_per_second: 50.0,
            burst: 3,
        });
        let start = Instant::now();
        for _ in 0..3 {
            bucket.acquire();
        }
        assert!(start.elapsed() < Duration::from_millis(15));
        bucket.acquire();
        assert!(start.elapsed() >= Duration::from_millis(15));
    }
}
