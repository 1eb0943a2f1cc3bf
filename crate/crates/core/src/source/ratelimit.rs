use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

/// Caps the number of requests in flight and spaces request starts at least
/// `interval` apart. Shared by every fetch of a process.
#[derive(Debug)]
pub struct RateLimiter {
    max_in_flight: usize,
    interval: Duration,
    state: Mutex<State>,
    released: Condvar,
}

#[derive(Debug, Default)]
struct State {
    in_flight: usize,
    next_start: Option<Instant>,
}

pub struct Permit<'a> {
    limiter: &'a RateLimiter,
}

impl RateLimiter {
    pub fn new(max_in_flight: usize, interval: Duration) -> Self {
        RateLimiter {
            max_in_flight: max_in_flight.max(1),
            interval,
            state: Mutex::new(State::default()),
            released: Condvar::new(),
        }
    }

    /// Block until a request may start.
    pub fn acquire(&self) -> Permit<'_> {
        let mut st = self.state.lock().unwrap();
        while st.in_flight >= self.max_in_flight {
            st = self.released.wait(st).unwrap();
        }
        st.in_flight += 1;
        let now = Instant::now();
        let start = st.next_start.map_or(now, |t| t.max(now));
        st.next_start = Some(start + self.interval);
        drop(st);
        if start > now {
            std::thread::sleep(start - now);
        }
        Permit { limiter: self }
    }

    pub fn in_flight(&self) -> usize {
        self.state.lock().unwrap().in_flight
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut st = self.limiter.state.lock().unwrap();
        st.in_flight -= 1;
        self.limiter.released.notify_one();
    }
}
