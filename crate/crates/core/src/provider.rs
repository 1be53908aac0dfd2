//! SNI-based provider detection against a configurable suffix-pattern table.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Provider {
    #[serde(rename = "YT")]
    Yt,
    #[serde(rename = "NF")]
    Nf,
    #[serde(rename = "DN")]
    Dn,
    #[serde(rename = "AP")]
    Ap,
    #[serde(rename = "None")]
    None,
}

impl fmt::Display for Provider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Provider::Yt => "YT",
            Provider::Nf => "NF",
            Provider::Dn => "DN",
            Provider::Ap => "AP",
            Provider::None => "None",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Provider {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "YT" => Ok(Provider::Yt),
            "NF" => Ok(Provider::Nf),
            "DN" => Ok(Provider::Dn),
            "AP" => Ok(Provider::Ap),
            "None" => Ok(Provider::None),
            other => Err(format!("unknown provider {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Management,
    Content,
    Unknown,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Role::Management => "management",
            Role::Content => "content",
            Role::Unknown => "unknown",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProviderPattern {
    /// Domain suffix; a leading dot also matches the bare domain.
    pub pattern: String,
    pub provider: Provider,
    pub role: Role,
}

/// Ordered pattern table; the longest matching suffix wins.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProviderTable {
    pub patterns: Vec<ProviderPattern>,
}

impl Default for ProviderTable {
    fn default() -> Self {
        let entry = |pattern: &str, provider, role| ProviderPattern {
            pattern: pattern.to_string(),
            provider,
            role,
        };
        ProviderTable {
            patterns: vec![
                entry(".youtube.com", Provider::Yt, Role::Management),
                entry(".netflix.com", Provider::Nf, Role::Management),
                entry(".primevideo.com", Provider::Ap, Role::Management),
                entry(".disneyplus.com", Provider::Dn, Role::Management),
                entry(".googlevideo.com", Provider::Yt, Role::Content),
            ],
        }
    }
}

impl ProviderTable {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        let patterns: Vec<ProviderPattern> = serde_json::from_str(&text)?;
        Ok(ProviderTable { patterns })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.patterns).expect("pattern table serializes")
    }

    /// Longest-suffix match of `sni` against the table. The port parameter is
    /// reserved for port-based rules; the shipped table matches on SNI only.
    pub fn detect(&self, sni: &str, _port: u16) -> (Provider, Role) {
        if sni.is_empty() {
            return (Provider::None, Role::Unknown);
        }
        let host = sni.to_ascii_lowercase();
        let mut best: Option<&ProviderPattern> = None;
        for p in &self.patterns {
            let pat = p.pattern.to_ascii_lowercase();
            let matched = if let Some(bare) = pat.strip_prefix('.') {
                host == bare || host.ends_with(&pat)
            } else {
                host == pat || host.ends_with(&format!(".{pat}"))
            };
            if matched && best.map_or(true, |b| pat.len() > b.pattern.len()) {
                best = Some(p);
            }
        }
        match best {
            Some(p) => (p.provider, p.role),
            None => (Provider::None, Role::Unknown),
        }
    }
}

/// Convenience wrapper over [`ProviderTable::detect`].
pub fn detect_provider(sni: &str, port: u16, table: &ProviderTable) -> (Provider, Role) {
    table.detect(sni, port)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn management_domain_matches() {
        let t = ProviderTable::default();
        assert_eq!(t.detect("www.youtube.com", 443), (Provider::Yt, Role::Management));
        assert_eq!(t.detect("api.netflix.com", 443), (Provider::Nf, Role::Management));
        assert_eq!(t.detect("www.disneyplus.com", 443), (Provider::Dn, Role::Management));
        assert_eq!(t.detect("app.primevideo.com", 443), (Provider::Ap, Role::Management));
    }

    #[test]
    fn content_domain_matches() {
        let t = ProviderTable::default();
        assert_eq!(
            t.detect("rr4---sn-abc.googlevideo.com", 443),
            (Provider::Yt, Role::Content)
        );
    }

    #[test]
    fn unmatched_host_is_none() {
        let t = ProviderTable::default();
        assert_eq!(t.detect("example.com", 443), (Provider::None, Role::Unknown));
        assert_eq!(t.detect("", 443), (Provider::None, Role::Unknown));
    }

    #[test]
    fn bare_domain_matches_dotted_pattern() {
        let t = ProviderTable::default();
        assert_eq!(t.detect("youtube.com", 443), (Provider::Yt, Role::Management));
    }

    #[test]
    fn longest_suffix_wins() {
        let t = ProviderTable {
            patterns: vec![
                ProviderPattern {
                    pattern: ".example.com".into(),
                    provider: Provider::Nf,
                    role: Role::Management,
                },
                ProviderPattern {
                    pattern: ".video.example.com".into(),
                    provider: Provider::Nf,
                    role: Role::Content,
                },
            ],
        };
        assert_eq!(t.detect("cdn.video.example.com", 443), (Provider::Nf, Role::Content));
        assert_eq!(t.detect("www.example.com", 443), (Provider::Nf, Role::Management));
    }

    #[test]
    fn detection_is_case_insensitive() {
        let t = ProviderTable::default();
        assert_eq!(t.detect("WWW.YouTube.COM", 443), (Provider::Yt, Role::Management));
    }

    #[test]
    fn suffix_must_align_on_label_boundary() {
        let t = ProviderTable::default();
        assert_eq!(t.detect("notyoutube.com", 443), (Provider::None, Role::Unknown));
    }

    #[test]
    fn json_round_trip() {
        let t = ProviderTable::default();
        let json = t.to_json();
        let parsed: Vec<ProviderPattern> = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.len(), t.patterns.len());
        assert_eq!(parsed[0].provider, Provider::Yt);
        assert_eq!(parsed[0].role, Role::Management);
    }
}
