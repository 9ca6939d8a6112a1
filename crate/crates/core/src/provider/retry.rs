use std::time::Duration;

use super::{CompletionRequest, CompletionResponse, LlmBackend, ProviderError};

/// Retry schedule for transport failures.
///
/// `backoff[i]` is the wait before attempt `i + 2`; the last entry repeats if
/// the schedule is shorter than `max_attempts - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub backoff: Vec<Duration>,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self::exponential(3, Duration::from_secs(1))
    }
}

impl RetryPolicy {
    pub fn exponential(max_attempts: u32, initial: Duration) -> Self {
        let max_attempts = max_attempts.max(1);
        let backoff = (0..max_attempts.saturating_sub(1))
            .map(|i| initial.saturating_mul(1 << i.min(16)))
            .collect();
        Self {
            max_attempts,
            backoff,
        }
    }

    /// No waiting between attempts.
    pub fn immediate(max_attempts: u32) -> Self {
        Self {
            max_attempts: max_attempts.max(1),
            backoff: Vec::new(),
        }
    }

    pub fn delay_before(&self, attempt: u32) -> Duration {
        if attempt < 2 {
            return Duration::ZERO;
        }
        let i = (attempt - 2) as usize;
        self.backoff
            .get(i)
            .or(self.backoff.last())
            .copied()
            .unwrap_or(Duration::ZERO)
    }
}

/// Calls the backend, retrying only `transport` failures.
pub fn with_retry(
    backend: &dyn LlmBackend,
    request: &CompletionRequest,
    policy: &RetryPolicy,
) -> Result<CompletionResponse, ProviderError> {
    let attempts = policy.max_attempts.max(1);
    let mut attempt = 1;
    loop {
        match backend.complete(request) {
            Ok(response) => return Ok(response),
            Err(err) if err.is_retryable() && attempt < attempts => {
                attempt += 1;
                let delay = policy.delay_before(attempt);
                tracing::warn!(%err, attempt, ?delay, "retrying model call");
                if !delay.is_zero() {
                    std::thread::sleep(delay);
                }
            }
            Err(err) => return Err(err),
        }
    }
}
