use std::sync::Mutex;
use std::time::{Duration, Instant};

/// Token bucket shared by all threads using one client.
#[derive(Debug)]
pub struct TokenBucket {
    capacity: f64,
    per_sec: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    /// `per_minute` sustained requests with bursts up to `burst`.
    pub fn new(per_minute: f64, burst: u32) -> Self {
        let capacity = f64::from(burst.max(1));
        Self {
            capacity,
            per_sec: per_minute / 60.0,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    /// Blocks until a token is available and takes it.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut st = self.state.lock().unwrap_or_else(|p| p.into_inner());
                let now = Instant::now();
                let refill = now.duration_since(st.1).as_secs_f64() * self.per_sec;
                st.0 = (st.0 + refill).min(self.capacity);
                st.1 = now;
                if st.0 >= 1.0 {
                    st.0 -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - st.0) / self.per_sec)
            };
            std::thread::sleep(wait);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn burst_then_throttle() {
        let b = TokenBucket::new(600.0, 2); // 10/s
        let t0 = Instant::now();
        b.acquire();
        b.acquire();
        assert!(t0.elapsed() < Duration::from_millis(50));
        b.acquire();
        b.acquire();
        assert!(t0.elapsed() >= Duration::from_millis(180));
    }
}
