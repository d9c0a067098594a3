use std::time::Duration;

use tracing::warn;

/// Bounded exponential backoff: attempt `n` (0-based) sleeps
/// `min(base * 2^n, max)` before the next try.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay: Duration::from_millis(250),
            max_delay: Duration::from_secs(20),
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        let factor = 2u32.saturating_pow(attempt);
        self.base_delay.saturating_mul(factor).min(self.max_delay)
    }
}

/// Outcome of a single attempt.
pub enum Attempt<T, E> {
    Done(T),
    /// Worth retrying (transport failure, 429, 5xx).
    Transient(E),
    Fatal(E),
}

/// Runs `op` until it succeeds, fails fatally, or `1 + max_retries`
/// attempts are used up. Returns the last error otherwise.
pub fn with_retry<T, E: std::fmt::Display>(
    policy: &RetryPolicy,
    mut op: impl FnMut(u32) -> Attempt<T, E>,
) -> Result<T, E> {
    let mut attempt = 0;
    loop {
        match op(attempt) {
            Attempt::Done(v) => return Ok(v),
            Attempt::Fatal(e) => return Err(e),
            Attempt::Transient(e) if attempt >= policy.max_retries => return Err(e),
            Attempt::Transient(e) => {
                let d = policy.delay(attempt);
                warn!(attempt, delay_ms = d.as_millis() as u64, "transient failure: {e}");
                std::thread::sleep(d);
                attempt += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fast(max_retries: u32) -> RetryPolicy {
        RetryPolicy {
            max_retries,
            base_delay: Duration::from_millis(1),
            max_delay: Duration::from_millis(2),
        }
    }

    #[test]
    fn delays_double_and_cap() {
        let p = RetryPolicy {
            max_retries: 5,
            base_delay: Duration::from_millis(100),
            max_delay: Duration::from_millis(500),
        };
        let ds: Vec<u128> = (0..5).map(|i| p.delay(i).as_millis()).collect();
        assert_eq!(ds, [100, 200, 400, 500, 500]);
    }

    #[test]
    fn attempts_bounded() {
        let mut calls = 0;
        let r: Result<(), String> = with_retry(&fast(3), |_| {
            calls += 1;
            Attempt::Transient("boom".to_string())
        });
        assert!(r.is_err());
        assert_eq!(calls, 4);
    }

    #[test]
    fn fatal_stops_immediately() {
        let mut calls = 0;
        let r: Result<(), String> = with_retry(&fast(3), |_| {
            calls += 1;
            Attempt::Fatal("no".to_string())
        });
        assert!(r.is_err());
        assert_eq!(calls, 1);
    }

    #[test]
    fn recovers() {
        let r: Result<u32, String> = with_retry(&fast(3), |n| {
            if n < 2 {
                Attempt::Transient("x".into())
            } else {
                Attempt::Done(n)
            }
        });
        assert_eq!(r.unwrap(), 2);
    }
}
