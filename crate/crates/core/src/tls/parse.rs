//! ClientHello body parser.

use serde::{Deserialize, Serialize};

use crate::bytes::Reader;
use crate::error::ChloError;
use crate::tls::{canonicalize_grease, ext_type};

/// One extension as it appeared on the wire. The type code is kept raw, so
/// GREASE values survive here while the decoded views canonicalize them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Extension {
    pub type_code: u16,
    #[serde(with = "crate::hexbytes")]
    pub body: Vec<u8>,
}

/// Values decoded from recognized extensions. Absent extensions leave their
/// field `None` (or `false` for presence-only extensions).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct DecodedExtensions {
    pub server_name: Option<String>,
    pub status_request: Option<u8>,
    pub supported_groups: Option<Vec<u16>>,
    pub ec_point_formats: Option<Vec<u8>>,
    pub signature_algorithms: Option<Vec<u16>>,
    pub alpn: Option<Vec<String>>,
    pub signed_certificate_timestamp: Option<u32>,
    pub padding: Option<u32>,
    pub encrypt_then_mac: bool,
    pub extended_master_secret: bool,
    pub compress_certificate: Option<Vec<u16>>,
    pub record_size_limit: Option<u16>,
    pub delegated_credentials: Option<Vec<u16>>,
    pub session_ticket: Option<u32>,
    pub pre_shared_key: bool,
    pub early_data: Option<u32>,
    pub supported_versions: Option<Vec<u16>>,
    pub psk_key_exchange_modes: Option<Vec<u8>>,
    pub post_handshake_auth: bool,
    pub key_share: Option<Vec<u16>>,
    pub application_settings: Option<Vec<String>>,
    pub renegotiation_info: bool,
    #[serde(with = "crate::hexbytes::opt", default)]
    pub quic_transport_parameters: Option<Vec<u8>>,
}

/// Parsed ClientHello. List fields preserve wire order; GREASE code points
/// in decoded lists are canonicalized while `extensions` keeps raw bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ClientHello {
    /// Length of the handshake message body in bytes.
    pub handshake_length: u32,
    pub legacy_version: u16,
    pub cipher_suites: Vec<u16>,
    pub compression_methods: Vec<u8>,
    pub extensions_length: u32,
    pub extensions: Vec<Extension>,
    pub ext: DecodedExtensions,
}

impl ClientHello {
    /// Ordered extension type codes with GREASE canonicalized.
    pub fn extension_types(&self) -> Vec<u16> {
        self.extensions.iter().map(|e| canonicalize_grease(e.type_code)).collect()
    }
}

fn malformed(pos: usize) -> ChloError {
    ChloError::Malformed(pos)
}

/// Parses a complete ClientHello handshake message body.
pub fn parse_client_hello(raw: &[u8]) -> Result<ClientHello, ChloError> {
    let mut r = Reader::new(raw);
    let legacy_version = r.u16().map_err(malformed)?;
    r.take(32).map_err(malformed)?;
    let sid_len = r.u8().map_err(malformed)? as usize;
    if sid_len > 32 {
        return Err(malformed(r.pos()));
    }
    r.take(sid_len).map_err(malformed)?;
    let cipher_len = r.u16().map_err(malformed)? as usize;
    if cipher_len % 2 != 0 {
        return Err(malformed(r.pos()));
    }
    let mut ciphers = r.slice(cipher_len).map_err(malformed)?;
    let mut cipher_suites = Vec::with_capacity(cipher_len / 2);
    while !ciphers.is_empty() {
        cipher_suites.push(canonicalize_grease(ciphers.u16().map_err(malformed)?));
    }
    let comp_len = r.u8().map_err(malformed)? as usize;
    let compression_methods = r.take(comp_len).map_err(malformed)?.to_vec();

    let mut chlo = ClientHello {
        handshake_length: raw.len() as u32,
        legacy_version,
        cipher_suites,
        compression_methods,
        extensions_length: 0,
        extensions: Vec::new(),
        ext: DecodedExtensions::default(),
    };

    if r.is_empty() {
        return Ok(chlo);
    }
    let ext_block_len = r.u16().map_err(malformed)? as usize;
    chlo.extensions_length = ext_block_len as u32;
    let ext_start = r.pos();
    let mut exts = r.slice(ext_block_len).map_err(malformed)?;
    if !r.is_empty() {
        return Err(malformed(r.pos()));
    }
    while !exts.is_empty() {
        let type_code = exts.u16().map_err(|p| malformed(ext_start + p))?;
        let body_len = exts.u16().map_err(|p| malformed(ext_start + p))? as usize;
        let body_off = ext_start + exts.pos();
        let body = exts.take(body_len).map_err(|p| malformed(ext_start + p))?;
        decode_extension(type_code, body, body_off, &mut chlo.ext)?;
        chlo.extensions.push(Extension { type_code, body: body.to_vec() });
    }
    Ok(chlo)
}

fn decode_extension(
    type_code: u16,
    body: &[u8],
    off: usize,
    out: &mut DecodedExtensions,
) -> Result<(), ChloError> {
    let err = |r: &Reader| malformed(off + r.pos());
    let mut r = Reader::new(body);
    match type_code {
        ext_type::SERVER_NAME => {
            let list_len = r.u16().map_err(malformed_at(off))? as usize;
            let mut list = r.slice(list_len).map_err(malformed_at(off))?;
            while !list.is_empty() {
                let name_type = list.u8().map_err(malformed_at(off))?;
                let name_len = list.u16().map_err(malformed_at(off))? as usize;
                let name = list.take(name_len).map_err(malformed_at(off))?;
                if name_type == 0 {
                    out.server_name = Some(String::from_utf8_lossy(name).into_owned());
                }
            }
        }
        ext_type::STATUS_REQUEST => {
            out.status_request = Some(r.u8().map_err(malformed_at(off))?);
        }
        ext_type::SUPPORTED_GROUPS => {
            out.supported_groups = Some(read_u16_list(&mut r, ListLen::U16, off)?);
        }
        ext_type::EC_POINT_FORMATS => {
            let n = r.u8().map_err(malformed_at(off))? as usize;
            out.ec_point_formats = Some(r.take(n).map_err(malformed_at(off))?.to_vec());
        }
        ext_type::SIGNATURE_ALGORITHMS => {
            out.signature_algorithms = Some(read_u16_list(&mut r, ListLen::U16, off)?);
        }
        ext_type::ALPN => {
            out.alpn = Some(read_string_list(&mut r, off)?);
        }
        ext_type::SIGNED_CERTIFICATE_TIMESTAMP => {
            out.signed_certificate_timestamp = Some(body.len() as u32);
        }
        ext_type::PADDING => {
            out.padding = Some(body.len() as u32);
        }
        ext_type::ENCRYPT_THEN_MAC => out.encrypt_then_mac = true,
        ext_type::EXTENDED_MASTER_SECRET => out.extended_master_secret = true,
        ext_type::COMPRESS_CERTIFICATE => {
            let n = r.u8().map_err(malformed_at(off))? as usize;
            if n % 2 != 0 {
                return Err(err(&r));
            }
            let mut algs = r.slice(n).map_err(malformed_at(off))?;
            let mut list = Vec::with_capacity(n / 2);
            while !algs.is_empty() {
                list.push(algs.u16().map_err(malformed_at(off))?);
            }
            out.compress_certificate = Some(list);
        }
        ext_type::RECORD_SIZE_LIMIT => {
            out.record_size_limit = Some(r.u16().map_err(malformed_at(off))?);
        }
        ext_type::DELEGATED_CREDENTIALS => {
            out.delegated_credentials = Some(read_u16_list(&mut r, ListLen::U16, off)?);
        }
        ext_type::SESSION_TICKET => {
            out.session_ticket = Some(body.len() as u32);
        }
        ext_type::PRE_SHARED_KEY => out.pre_shared_key = true,
        ext_type::EARLY_DATA => {
            out.early_data = Some(body.len() as u32);
        }
        ext_type::SUPPORTED_VERSIONS => {
            out.supported_versions = Some(read_u16_list(&mut r, ListLen::U8, off)?);
        }
        ext_type::PSK_KEY_EXCHANGE_MODES => {
            let n = r.u8().map_err(malformed_at(off))? as usize;
            out.psk_key_exchange_modes = Some(r.take(n).map_err(malformed_at(off))?.to_vec());
        }
        ext_type::POST_HANDSHAKE_AUTH => out.post_handshake_auth = true,
        ext_type::KEY_SHARE => {
            let list_len = r.u16().map_err(malformed_at(off))? as usize;
            let mut list = r.slice(list_len).map_err(malformed_at(off))?;
            let mut groups = Vec::new();
            while !list.is_empty() {
                let group = list.u16().map_err(malformed_at(off))?;
                let kex_len = list.u16().map_err(malformed_at(off))? as usize;
                list.take(kex_len).map_err(malformed_at(off))?;
                groups.push(canonicalize_grease(group));
            }
            out.key_share = Some(groups);
        }
        ext_type::APPLICATION_SETTINGS => {
            out.application_settings = Some(read_string_list(&mut r, off)?);
        }
        ext_type::RENEGOTIATION_INFO => out.renegotiation_info = true,
        ext_type::QUIC_TRANSPORT_PARAMETERS => {
            out.quic_transport_parameters = Some(body.to_vec());
        }
        _ => {}
    }
    Ok(())
}

enum ListLen {
    U8,
    U16,
}

fn malformed_at(off: usize) -> impl Fn(usize) -> ChloError {
    move |pos| ChloError::Malformed(off + pos)
}

fn read_u16_list(r: &mut Reader, len_kind: ListLen, off: usize) -> Result<Vec<u16>, ChloError> {
    let n = match len_kind {
        ListLen::U8 => r.u8().map_err(malformed_at(off))? as usize,
        ListLen::U16 => r.u16().map_err(malformed_at(off))? as usize,
    };
    if n % 2 != 0 {
        return Err(ChloError::Malformed(off + r.pos()));
    }
    let mut items = r.slice(n).map_err(malformed_at(off))?;
    let mut out = Vec::with_capacity(n / 2);
    while !items.is_empty() {
        out.push(canonicalize_grease(items.u16().map_err(malformed_at(off))?));
    }
    Ok(out)
}

fn read_string_list(r: &mut Reader, off: usize) -> Result<Vec<String>, ChloError> {
    let list_len = r.u16().map_err(malformed_at(off))? as usize;
    let mut list = r.slice(list_len).map_err(malformed_at(off))?;
    let mut out = Vec::new();
    while !list.is_empty() {
        let n = list.u8().map_err(malformed_at(off))? as usize;
        let s = list.take(n).map_err(malformed_at(off))?;
        out.push(String::from_utf8_lossy(s).into_owned());
    }
    Ok(out)
}
