//! IUPAC name lookup against a PubChem-style REST service, cached by
//! canonical SMILES.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use percent_encoding::{utf8_percent_encode, NON_ALPHANUMERIC};

use super::limits::RetryPolicy;
use super::transport::HttpTransport;
use crate::molgraph::canonical_smiles;

pub const PUBCHEM_BASE: &str = "https://pubchem.ncbi.nlm.nih.gov/rest/pug";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LookupError {
    #[error("name service unavailable for '{smiles}': {reason}")]
    ServiceUnavailable { smiles: String, reason: String },
    #[error("cannot look up unparseable SMILES '{0}'")]
    InvalidSmiles(String),
    #[error("name cache: {0}")]
    Cache(String),
}

enum Attempt {
    Found(Option<String>),
    Transient(String),
}

pub struct IupacClient {
    base_url: String,
    transport: Option<Arc<dyn HttpTransport>>,
    retry: RetryPolicy,
    cache: Mutex<BTreeMap<String, Option<String>>>,
}

impl IupacClient {
    pub fn new(base_url: impl Into<String>, transport: Arc<dyn HttpTransport>, retry: RetryPolicy) -> IupacClient {
        IupacClient {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            transport: Some(transport),
            retry,
            cache: Mutex::new(BTreeMap::new()),
        }
    }

    /// Answers from the cache only; anything uncached is a miss.
    pub fn offline() -> IupacClient {
        IupacClient {
            base_url: String::new(),
            transport: None,
            retry: RetryPolicy::no_wait(1),
            cache: Mutex::new(BTreeMap::new()),
        }
    }

    /// Merges a JSON object of `canonical SMILES -> name or null` into the
    /// cache. Keys are re-canonicalized.
    pub fn load_cache(&self, path: &Path) -> Result<usize, LookupError> {
        let text = std::fs::read_to_string(path).map_err(|e| LookupError::Cache(format!("{}: {e}", path.display())))?;
        let entries: BTreeMap<String, Option<String>> =
            serde_json::from_str(&text).map_err(|e| LookupError::Cache(format!("{}: {e}", path.display())))?;
        let mut cache = self.cache.lock().expect("cache lock");
        let n = entries.len();
        for (smiles, name) in entries {
            let key = canonical_smiles(&smiles).map_err(|_| LookupError::InvalidSmiles(smiles.clone()))?;
            cache.insert(key, name);
        }
        Ok(n)
    }

    pub fn save_cache(&self, path: &Path) -> Result<(), LookupError> {
        let text = serde_json::to_string_pretty(&*self.cache.lock().expect("cache lock")).expect("map serializes");
        std::fs::write(path, text + "\n").map_err(|e| LookupError::Cache(e.to_string()))
    }

    pub fn cached(&self, canonical: &str) -> Option<Option<String>> {
        self.cache.lock().expect("cache lock").get(canonical).cloned()
    }

    fn url(&self, smiles: &str) -> String {
        format!(
            "{}/compound/smiles/{}/property/IUPACName/JSON",
            self.base_url,
            utf8_percent_encode(smiles, NON_ALPHANUMERIC)
        )
    }

    fn request(&self, transport: &dyn HttpTransport, smiles: &str) -> Attempt {
        let reply = match transport.get(&self.url(smiles), &[]) {
            Ok(r) => r,
            Err(e) => return Attempt::Transient(e.to_string()),
        };
        match reply.status {
            200 => {
                let Ok(v) = serde_json::from_str::<serde_json::Value>(&reply.body) else {
                    return Attempt::Transient("malformed response body".into());
                };
                let Some(props) = v.pointer("/PropertyTable/Properties/0") else {
                    return Attempt::Transient("response lacks PropertyTable.Properties".into());
                };
                Attempt::Found(
                    props
                        .get("IUPACName")
                        .and_then(|n| n.as_str())
                        .map(str::to_string),
                )
            }
            404 => Attempt::Found(None),
            code if code == 429 || code >= 500 => Attempt::Transient(format!("HTTP {code}")),
            code => Attempt::Transient(format!("unexpected HTTP {code}")),
        }
    }
}

/// Preferred IUPAC name for `smiles`, or `None` when the service has no
/// record. Transient failures are retried; once retries run out the error
/// is [`LookupError::ServiceUnavailable`].
pub fn fetch_iupac(smiles: &str, client: &IupacClient) -> Result<Option<String>, LookupError> {
    let canonical = canonical_smiles(smiles).map_err(|_| LookupError::InvalidSmiles(smiles.to_string()))?;
    if let Some(hit) = client.cached(&canonical) {
        return Ok(hit);
    }
    let Some(transport) = client.transport.as_deref() else {
        return Ok(None);
    };
    let (result, _) = client.retry.run(
        |_| match client.request(transport, &canonical) {
            Attempt::Found(name) => Ok(name),
            Attempt::Transient(reason) => Err(reason),
        },
        |_| true,
    );
    let name = result.map_err(|reason| LookupError::ServiceUnavailable {
        smiles: smiles.to_string(),
        reason,
    })?;
    client
        .cache
        .lock()
        .expect("cache lock")
        .insert(canonical, name.clone());
    Ok(name)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::transport::{HttpReply, TransportError};
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Fixed {
        status: u16,
        body: &'static str,
        calls: AtomicUsize,
        last_url: Mutex<String>,
    }

    impl Fixed {
        fn new(status: u16, body: &'static str) -> Arc<Fixed> {
            Arc::new(Fixed {
                status,
                body,
                calls: AtomicUsize::new(0),
                last_url: Mutex::new(String::new()),
            })
        }
    }

    impl HttpTransport for Fixed {
        fn get(&self, url: &str, _: &[(String, String)]) -> Result<HttpReply, TransportError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            *self.last_url.lock().unwrap() = url.to_string();
            Ok(HttpReply {
                status: self.status,
                body: self.body.to_string(),
            })
        }

        fn post_json(&self, _: &str, _: &[(String, String)], _: &serde_json::Value) -> Result<HttpReply, TransportError> {
            unreachable!()
        }
    }

    #[test]
    fn found_and_cached() {
        let t = Fixed::new(200, r#"{"PropertyTable":{"Properties":[{"CID":702,"IUPACName":"ethanol"}]}}"#);
        let c = IupacClient::new("http://svc/rest/pug/", t.clone(), RetryPolicy::no_wait(3));
        assert_eq!(fetch_iupac("OCC", &c).unwrap().as_deref(), Some("ethanol"));
        assert_eq!(fetch_iupac("CCO", &c).unwrap().as_deref(), Some("ethanol"));
        assert_eq!(t.calls.load(Ordering::SeqCst), 1);
        assert!(t.last_url.lock().unwrap().starts_with("http://svc/rest/pug/compound/smiles/"));
        assert!(t.last_url.lock().unwrap().ends_with("/property/IUPACName/JSON"));
    }

    #[test]
    fn not_found_is_a_miss() {
        let t = Fixed::new(404, r#"{"Fault":{"Code":"PUGREST.NotFound"}}"#);
        let c = IupacClient::new("http://svc", t.clone(), RetryPolicy::no_wait(3));
        assert_eq!(fetch_iupac("[Xe]", &c).unwrap(), None);
        assert_eq!(t.calls.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn malformed_body_exhausts_retries() {
        let t = Fixed::new(200, "<html>oops");
        let c = IupacClient::new("http://svc", t.clone(), RetryPolicy::no_wait(3));
        assert!(matches!(
            fetch_iupac("CCO", &c),
            Err(LookupError::ServiceUnavailable { .. })
        ));
        assert_eq!(t.calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn offline_cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("names.json");
        std::fs::write(&path, r#"{"OCC": "ethanol", "C1CC1": null}"#).unwrap();
        let c = IupacClient::offline();
        assert_eq!(c.load_cache(&path).unwrap(), 2);
        assert_eq!(fetch_iupac("CCO", &c).unwrap().as_deref(), Some("ethanol"));
        assert_eq!(fetch_iupac("C1CC1", &c).unwrap(), None);
        assert_eq!(fetch_iupac("CCCC", &c).unwrap(), None);
        assert!(matches!(fetch_iupac("C(", &c), Err(LookupError::InvalidSmiles(_))));
        c.save_cache(&path).unwrap();
        assert!(std::fs::read_to_string(&path).unwrap().contains("\"CCO\": \"ethanol\""));
    }
}
