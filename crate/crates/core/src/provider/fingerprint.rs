use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CompletionRequest;

/// Request fields covered by the replay fingerprint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FingerprintField {
    SystemText,
    UserText,
    Temperature,
}

impl fmt::Display for FingerprintField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FingerprintField::SystemText => "system_text",
            FingerprintField::UserText => "user_text",
            FingerprintField::Temperature => "temperature",
        })
    }
}

/// Per-field digests of (system_text, user_text, temperature).
///
/// Rendered as `sys.user.temp` hex so a mismatch can name the first field
/// that changed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Fingerprint {
    system: String,
    user: String,
    temperature: String,
}

fn digest(bytes: &[u8], len: usize) -> String {
    let hash = Sha256::digest(bytes);
    hash.iter()
        .map(|b| format!("{b:02x}"))
        .collect::<String>()[..len]
        .to_string()
}

impl Fingerprint {
    pub fn of(request: &CompletionRequest) -> Self {
        Self {
            system: digest(request.system_text.as_bytes(), 16),
            user: digest(request.user_text.as_bytes(), 16),
            temperature: digest(&request.temperature.to_bits().to_le_bytes(), 8),
        }
    }

    /// First field that differs, in (system, user, temperature) order.
    pub fn first_difference(&self, other: &Fingerprint) -> Option<FingerprintField> {
        if self.system != other.system {
            Some(FingerprintField::SystemText)
        } else if self.user != other.user {
            Some(FingerprintField::UserText)
        } else if self.temperature != other.temperature {
            Some(FingerprintField::Temperature)
        } else {
            None
        }
    }
}

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.system, self.user, self.temperature)
    }
}

impl FromStr for Fingerprint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('.').collect();
        match parts.as_slice() {
            [system, user, temperature] => Ok(Self {
                system: system.to_string(),
                user: user.to_string(),
                temperature: temperature.to_string(),
            }),
            _ => Err(format!("malformed fingerprint '{s}'")),
        }
    }
}
