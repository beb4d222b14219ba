//! Canonical JSON: object keys sorted, no insignificant whitespace, floats
//! in shortest round-trip form. Used for the wire format, the event log and
//! content hashes.

use serde::Serialize;
use sha2::{Digest, Sha256};

pub fn to_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, serde_json::Error> {
    // Going through `Value` sorts every object's keys (its map is ordered).
    serde_json::to_vec(&serde_json::to_value(value)?)
}

pub fn to_string<T: Serialize + ?Sized>(value: &T) -> Result<String, serde_json::Error> {
    Ok(String::from_utf8(to_bytes(value)?).expect("serde_json emits UTF-8"))
}

/// Hex SHA-256 of the canonical encoding.
pub fn content_hash<T: Serialize + ?Sized>(value: &T) -> Result<String, serde_json::Error> {
    Ok(hex::encode(Sha256::digest(to_bytes(value)?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[derive(Serialize)]
    struct Unordered {
        zeta: f64,
        alpha: Vec<u8>,
        mid: HashMap<String, u32>,
    }

    #[test]
    fn keys_sorted_and_compact() {
        let v = Unordered {
            zeta: 0.1,
            alpha: vec![1, 2],
            mid: [("b".to_string(), 2), ("a".to_string(), 1)].into_iter().collect(),
        };
        assert_eq!(to_string(&v).unwrap(), r#"{"alpha":[1,2],"mid":{"a":1,"b":2},"zeta":0.1}"#);
    }

    #[test]
    fn floats_shortest_roundtrip() {
        for x in [0.1f64, 1.0 / 3.0, 1e-300, 123456789.125, -2.5e17] {
            let text = to_string(&x).unwrap();
            assert_eq!(text.parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(to_string(&0.30000000000000004).unwrap(), "0.30000000000000004");
    }
}
