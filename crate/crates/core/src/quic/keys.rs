//! Initial key schedule for QUIC v1 (RFC 9001 §5.2).

use hkdf::Hkdf;
use sha2::Sha256;

use crate::error::QuicError;

pub const QUIC_V1: u32 = 0x0000_0001;

const V1_SALT: [u8; 20] = [
    0x38, 0x76, 0x2c, 0xf7, 0xf5, 0x59, 0x34, 0xb3, 0x4d, 0x17, 0x9a, 0xe6, 0xa4, 0xc8, 0x0c,
    0xad, 0xcc, 0xbb, 0x7f, 0x0a,
];

/// Client-direction Initial keys derived from the destination connection ID.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InitialKeys {
    pub initial_secret: [u8; 32],
    pub client_secret: [u8; 32],
    pub key: [u8; 16],
    pub iv: [u8; 12],
    pub hp: [u8; 16],
}

fn hkdf_expand_label(secret: &[u8; 32], label: &str, out: &mut [u8]) {
    let mut info = Vec::with_capacity(10 + label.len());
    info.extend_from_slice(&(out.len() as u16).to_be_bytes());
    info.push((6 + label.len()) as u8);
    info.extend_from_slice(b"tls13 ");
    info.extend_from_slice(label.as_bytes());
    info.push(0);
    Hkdf::<Sha256>::from_prk(secret)
        .expect("32-byte PRK is valid for SHA-256")
        .expand(&info, out)
        .expect("output length within HKDF bounds");
}

/// Derives the client Initial keys for a connection. Only v1 has a salt here;
/// other versions fail with `UnknownVersionSalt`.
pub fn derive_initial_keys(dcid: &[u8], version: u32) -> Result<InitialKeys, QuicError> {
    if version != QUIC_V1 {
        return Err(QuicError::UnknownVersionSalt(version));
    }
    let (initial_prk, _) = Hkdf::<Sha256>::extract(Some(&V1_SALT), dcid);
    let initial_secret: [u8; 32] = initial_prk.as_slice().try_into().unwrap();
    let mut client_secret = [0u8; 32];
    hkdf_expand_label(&initial_secret, "client in", &mut client_secret);
    let mut key = [0u8; 16];
    let mut iv = [0u8; 12];
    let mut hp = [0u8; 16];
    hkdf_expand_label(&client_secret, "quic key", &mut key);
    hkdf_expand_label(&client_secret, "quic iv", &mut iv);
    hkdf_expand_label(&client_secret, "quic hp", &mut hp);
    Ok(InitialKeys { initial_secret, client_secret, key, iv, hp })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Published test vector: RFC 9001 Appendix A, dcid 0x8394c8f03e515708.
    const DCID: [u8; 8] = [0x83, 0x94, 0xc8, 0xf0, 0x3e, 0x51, 0x57, 0x08];

    #[test]
    fn reference_vector_matches_byte_exactly() {
        let keys = derive_initial_keys(&DCID, QUIC_V1).unwrap();
        assert_eq!(
            hex::encode(keys.initial_secret),
            "7db5df06e7a69e432496adedb00851923595221596ae2ae9fb8115c1e9ed0a44"
        );
        assert_eq!(
            hex::encode(keys.client_secret),
            "c00cf151ca5be075ed0ebfb5c80323c42d6b7db67881289af4008f1f6c357aea"
        );
        assert_eq!(hex::encode(keys.key), "1f369613dd76d5467730efcbe3b1a22d");
        assert_eq!(hex::encode(keys.iv), "fa044b2f42a3fd3b46fb255c");
        assert_eq!(hex::encode(keys.hp), "9f50449e04a0e810283a1e9933adedd2");
    }

    #[test]
    fn derivation_is_deterministic() {
        let a = derive_initial_keys(&DCID, QUIC_V1).unwrap();
        let b = derive_initial_keys(&DCID, QUIC_V1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_dcid_still_derives() {
        let keys = derive_initial_keys(&[], QUIC_V1).unwrap();
        assert_eq!(keys.key.len(), 16);
    }

    #[test]
    fn unknown_version_has_no_salt() {
        match derive_initial_keys(&DCID, 0x6b33_43cf) {
            Err(QuicError::UnknownVersionSalt(v)) => assert_eq!(v, 0x6b33_43cf),
            other => panic!("expected UnknownVersionSalt, got {other:?}"),
        }
    }
}
