//! JSON and CSV output with every float written to 17 significant digits,
//! which round-trips `f64` exactly and keeps output byte-for-byte stable.

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};
use std::io;

/// `x` with 17 significant digits in scientific notation; `NaN` and the
/// infinities are spelled out.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

struct Precise;

impl Formatter for Precise {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            writer.write_all(fmt_f64(value).as_bytes())
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Serialize `value` as compact JSON with 17-digit floats.
pub fn to_string<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, Precise);
    value.serialize(&mut ser).expect("serializing to memory cannot fail");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, -1.0 / 3.0, 6.875_185_818_020_373, 1e-300, 2.0] {
            let s = to_string(&serde_json::json!([x]));
            let back: f64 = s.trim_matches(['[', ']']).parse().unwrap();
            assert_eq!(back, x, "{s}");
        }
        assert_eq!(to_string(&serde_json::json!({"a": 2.0, "b": 3})), r#"{"a":2.0000000000000000e0,"b":3}"#);
    }

    #[test]
    fn non_finite_values() {
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
        assert_eq!(to_string(&serde_json::json!([f64::NAN])), "[null]");
    }
}
