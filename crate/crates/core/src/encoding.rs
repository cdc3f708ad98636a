//! Canonical byte encoding for every record that is hashed, signed or
//! written to disk.
//!
//! Layout: each field is a big-endian `u32` length followed by its payload,
//! in declaration order. Integers are fixed-width big-endian, reals are
//! their shortest round-trip decimal text, strings are UTF-8, nested
//! records and sequences are themselves length-prefixed. Decoding is
//! strict: any input that would not be re-produced byte-for-byte by the
//! encoder is rejected.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::EncodingError;

/// 256-bit SHA-256 digest.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Hash256(pub [u8; 32]);

impl Hash256 {
    pub const ZERO: Hash256 = Hash256([0u8; 32]);

    pub fn of(bytes: &[u8]) -> Hash256 {
        Hash256(Sha256::digest(bytes).into())
    }

    /// Hash of `prefix ‖ parts…`.
    pub fn of_parts(parts: &[&[u8]]) -> Hash256 {
        let mut h = Sha256::new();
        for p in parts {
            h.update(p);
        }
        Hash256(h.finalize().into())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    pub fn from_hex(s: &str) -> Option<Hash256> {
        let bytes = hex::decode(s).ok()?;
        Some(Hash256(bytes.try_into().ok()?))
    }
}

impl fmt::Debug for Hash256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hash256({})", &self.to_hex()[..16])
    }
}

impl fmt::Display for Hash256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Hash256 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Hash256 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Hash256::from_hex(&s).ok_or_else(|| serde::de::Error::custom("expected 64 hex characters"))
    }
}

/// A record with a canonical byte form.
pub trait Canonical: Sized {
    fn encode_fields(&self, enc: &mut Encoder);
    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, EncodingError>;

    fn canonical_bytes(&self) -> Vec<u8> {
        let mut enc = Encoder::default();
        self.encode_fields(&mut enc);
        enc.finish()
    }

    fn from_canonical_bytes(bytes: &[u8]) -> Result<Self, EncodingError> {
        let mut dec = Decoder::new(bytes);
        let v = Self::decode_fields(&mut dec)?;
        dec.finish()?;
        Ok(v)
    }

    fn digest(&self) -> Hash256 {
        Hash256::of(&self.canonical_bytes())
    }
}

#[derive(Default)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn finish(self) -> Vec<u8> {
        self.buf
    }

    fn field(&mut self, payload: &[u8]) {
        let len = u32::try_from(payload.len()).expect("field longer than 4 GiB");
        self.buf.extend_from_slice(&len.to_be_bytes());
        self.buf.extend_from_slice(payload);
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.field(&v.to_be_bytes());
        self
    }

    pub fn u32(&mut self, v: u32) -> &mut Self {
        self.field(&v.to_be_bytes());
        self
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.field(&[v]);
        self
    }

    pub fn bool(&mut self, v: bool) -> &mut Self {
        self.u8(v as u8)
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        debug_assert!(v.is_finite(), "canonical reals must be finite");
        self.field(format!("{v}").as_bytes());
        self
    }

    pub fn str(&mut self, v: &str) -> &mut Self {
        self.field(v.as_bytes());
        self
    }

    pub fn bytes(&mut self, v: &[u8]) -> &mut Self {
        self.field(v);
        self
    }

    pub fn hash(&mut self, v: &Hash256) -> &mut Self {
        self.field(&v.0);
        self
    }

    pub fn record<T: Canonical>(&mut self, v: &T) -> &mut Self {
        let inner = v.canonical_bytes();
        self.field(&inner);
        self
    }

    /// Element count (`u32`) followed by each element as a field.
    pub fn seq<T, F>(&mut self, items: &[T], mut each: F) -> &mut Self
    where
        F: FnMut(&mut Encoder, &T),
    {
        let mut inner = Encoder::default();
        inner.u32(items.len() as u32);
        for item in items {
            let mut e = Encoder::default();
            each(&mut e, item);
            inner.field(&e.finish());
        }
        let bytes = inner.finish();
        self.field(&bytes);
        self
    }

    pub fn records<T: Canonical>(&mut self, items: &[T]) -> &mut Self {
        self.seq(items, |e, v| v.encode_fields(e))
    }

    pub fn option<T: Canonical>(&mut self, v: &Option<T>) -> &mut Self {
        match v {
            Some(v) => self.seq(std::slice::from_ref(v), |e, v| v.encode_fields(e)),
            None => self.seq::<T, _>(&[], |_, _| {}),
        }
    }

    /// Map with strictly ascending string keys.
    pub fn map<V, F>(&mut self, map: &BTreeMap<String, V>, mut each: F) -> &mut Self
    where
        F: FnMut(&mut Encoder, &V),
    {
        let pairs: Vec<(&String, &V)> = map.iter().collect();
        self.seq(&pairs, |e, (k, v)| {
            e.str(k);
            each(e, v);
        })
    }
}

pub struct Decoder<'a> {
    buf: &'a [u8],
}

fn non_canonical(msg: impl Into<String>) -> EncodingError {
    EncodingError::NonCanonical(msg.into())
}

impl<'a> Decoder<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Decoder { buf }
    }

    pub fn finish(self) -> Result<(), EncodingError> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(EncodingError::TrailingBytes(self.buf.len()))
        }
    }

    fn field(&mut self) -> Result<&'a [u8], EncodingError> {
        if self.buf.len() < 4 {
            return Err(EncodingError::Truncated);
        }
        let (len, rest) = self.buf.split_at(4);
        let len = u32::from_be_bytes(len.try_into().unwrap()) as usize;
        if rest.len() < len {
            return Err(EncodingError::Truncated);
        }
        let (payload, rest) = rest.split_at(len);
        self.buf = rest;
        Ok(payload)
    }

    fn fixed<const N: usize>(&mut self, what: &str) -> Result<[u8; N], EncodingError> {
        let f = self.field()?;
        f.try_into()
            .map_err(|_| non_canonical(format!("{what} must be {N} bytes, got {}", f.len())))
    }

    pub fn u64(&mut self) -> Result<u64, EncodingError> {
        Ok(u64::from_be_bytes(self.fixed::<8>("u64")?))
    }

    pub fn u32(&mut self) -> Result<u32, EncodingError> {
        Ok(u32::from_be_bytes(self.fixed::<4>("u32")?))
    }

    pub fn u8(&mut self) -> Result<u8, EncodingError> {
        Ok(self.fixed::<1>("u8")?[0])
    }

    pub fn bool(&mut self) -> Result<bool, EncodingError> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(non_canonical(format!("bool byte {b}"))),
        }
    }

    pub fn f64(&mut self) -> Result<f64, EncodingError> {
        let text = std::str::from_utf8(self.field()?).map_err(|_| non_canonical("real is not UTF-8"))?;
        let v: f64 = text.parse().map_err(|_| non_canonical(format!("bad real `{text}`")))?;
        if !v.is_finite() || format!("{v}") != text {
            return Err(non_canonical(format!("real `{text}` is not in shortest form")));
        }
        Ok(v)
    }

    pub fn string(&mut self) -> Result<String, EncodingError> {
        let f = self.field()?;
        String::from_utf8(f.to_vec()).map_err(|_| non_canonical("string is not UTF-8"))
    }

    pub fn bytes(&mut self) -> Result<Vec<u8>, EncodingError> {
        Ok(self.field()?.to_vec())
    }

    pub fn hash(&mut self) -> Result<Hash256, EncodingError> {
        Ok(Hash256(self.fixed::<32>("digest")?))
    }

    pub fn record<T: Canonical>(&mut self) -> Result<T, EncodingError> {
        T::from_canonical_bytes(self.field()?)
    }

    pub fn seq<T, F>(&mut self, mut each: F) -> Result<Vec<T>, EncodingError>
    where
        F: FnMut(&mut Decoder<'a>) -> Result<T, EncodingError>,
    {
        let mut inner = Decoder::new(self.field()?);
        let count = inner.u32()? as usize;
        let mut out = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let mut d = Decoder::new(inner.field()?);
            out.push(each(&mut d)?);
            d.finish()?;
        }
        inner.finish()?;
        Ok(out)
    }

    pub fn records<T: Canonical>(&mut self) -> Result<Vec<T>, EncodingError> {
        self.seq(|d| T::decode_fields(d))
    }

    pub fn option<T: Canonical>(&mut self) -> Result<Option<T>, EncodingError> {
        let mut v = self.records::<T>()?;
        match v.len() {
            0 => Ok(None),
            1 => Ok(v.pop()),
            n => Err(non_canonical(format!("option with {n} elements"))),
        }
    }

    pub fn map<V, F>(&mut self, mut each: F) -> Result<BTreeMap<String, V>, EncodingError>
    where
        F: FnMut(&mut Decoder<'a>) -> Result<V, EncodingError>,
    {
        let pairs = self.seq(|d| Ok((d.string()?, each(d)?)))?;
        let mut map = BTreeMap::new();
        let mut last: Option<String> = None;
        for (k, v) in pairs {
            if last.as_ref().is_some_and(|l| *l >= k) {
                return Err(non_canonical("map keys not strictly ascending"));
            }
            last = Some(k.clone());
            map.insert(k, v);
        }
        Ok(map)
    }
}

pub const FORMAT_VERSION: u8 = 1;

/// File framing: 4-byte magic, one version byte, canonical record.
pub fn write_framed<T: Canonical>(magic: &[u8; 4], record: &T) -> Vec<u8> {
    let mut out = Vec::with_capacity(64);
    out.extend_from_slice(magic);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&record.canonical_bytes());
    out
}

pub fn read_framed<T: Canonical>(magic: &[u8; 4], bytes: &[u8]) -> Result<T, EncodingError> {
    if bytes.len() < 5 {
        return Err(EncodingError::Truncated);
    }
    if &bytes[..4] != magic {
        return Err(EncodingError::BadMagic);
    }
    if bytes[4] != FORMAT_VERSION {
        return Err(EncodingError::UnsupportedVersion(bytes[4]));
    }
    T::from_canonical_bytes(&bytes[5..])
}

// Records shared by several modules.

impl Canonical for crate::geometry::Vector3 {
    fn encode_fields(&self, enc: &mut Encoder) {
        enc.f64(self.x).f64(self.y).f64(self.z);
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        Ok(crate::geometry::Vector3::new(dec.f64()?, dec.f64()?, dec.f64()?))
    }
}

impl Canonical for crate::sensing::FeatureDescriptor {
    fn encode_fields(&self, enc: &mut Encoder) {
        use crate::sensing::FeatureValue;
        enc.u8(self.modality.code());
        match self.value {
            FeatureValue::Scalar(v) => enc.u8(0).f64(v),
            FeatureValue::Flag(b) => enc.u8(1).bool(b),
            FeatureValue::Count(c) => enc.u8(2).u32(c),
        };
        enc.f64(self.quality).f64(self.freshness).str(&self.witness_id);
    }

    fn decode_fields(dec: &mut Decoder<'_>) -> Result<Self, EncodingError> {
        use crate::sensing::{FeatureValue, Modality};
        let code = dec.u8()?;
        let modality = Modality::from_code(code).ok_or_else(|| non_canonical(format!("modality code {code}")))?;
        let value = match dec.u8()? {
            0 => FeatureValue::Scalar(dec.f64()?),
            1 => FeatureValue::Flag(dec.bool()?),
            2 => FeatureValue::Count(dec.u32()?),
            t => return Err(non_canonical(format!("feature value tag {t}"))),
        };
        Ok(crate::sensing::FeatureDescriptor {
            modality,
            value,
            quality: dec.f64()?,
            freshness: dec.f64()?,
            witness_id: dec.string()?,
        })
    }
}
