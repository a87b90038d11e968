//! JSON parameter files, CSV observation files and number formatting.

use std::io::{self, Write};
use std::path::Path;

use expfam::catalog::FAMILY_NAMES;
use expfam::family::Shape;
use expfam::mixtures::MixtureModel;
use expfam::{Family, Hyperparams, Observation, ParamVector, Space};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::CliError;

/// Mixture weights within this distance of summing to one are renormalized
/// silently.
const WEIGHT_SILENT: f64 = 1e-9;
/// Beyond the silent band and up to this distance, renormalized with a
/// warning; further away, rejected.
const WEIGHT_WARN: f64 = 1e-6;

/// `%.17g`: 17 significant digits with trailing zeros removed, plain notation
/// for decimal exponents in `[-5, 17)`.
pub fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return if v.is_nan() { "NaN".into() } else if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.16e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    let mut out = String::new();
    if negative {
        out.push('-');
    }
    if !(-5..17).contains(&exp) {
        out.push_str(&digits[..1]);
        if digits.len() > 1 {
            out.push('.');
            out.push_str(&digits[1..]);
        }
        out.push_str(&format!("e{exp}"));
    } else if exp < 0 {
        out.push_str("0.");
        out.push_str(&"0".repeat((-exp - 1) as usize));
        out.push_str(digits);
    } else {
        let int_len = exp as usize + 1;
        if digits.len() <= int_len {
            out.push_str(digits);
            out.push_str(&"0".repeat(int_len - digits.len()));
        } else {
            out.push_str(&digits[..int_len]);
            out.push('.');
            out.push_str(&digits[int_len..]);
        }
    }
    out
}

/// Compact JSON formatter that writes floats with [`fmt_num`].
struct G17;

impl serde_json::ser::Formatter for G17 {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            writer.write_all(fmt_num(value).as_bytes())
        } else {
            writer.write_all(b"null")
        }
    }
}

/// One-line JSON text.
pub fn to_json(value: &Value) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, G17);
    value.serialize(&mut ser).expect("serializing a JSON value cannot fail");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

fn parse_error(what: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::Parse(format!("{what}: {reason}"))
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))
}

/// Accepts the canonical family names plus `gaussian` for the univariate
/// Gaussian.
pub fn family_from_name(name: &str, hyper: &Hyperparams) -> Result<Family, CliError> {
    let canonical = match name {
        "gaussian" | "normal" => "univariate_gaussian",
        other => other,
    };
    if !FAMILY_NAMES.contains(&canonical) {
        return Err(CliError::Parse(format!(
            "unknown family `{name}` (known: {})",
            FAMILY_NAMES.join(", ")
        )));
    }
    Ok(Family::from_name(canonical, hyper)?)
}

fn hyperparams_from_json(fixed: Option<&Value>) -> Result<Hyperparams, CliError> {
    let mut hyper = Hyperparams::default();
    let Some(fixed) = fixed else {
        return Ok(hyper);
    };
    let obj = fixed.as_object().ok_or_else(|| parse_error("fixed", "expected an object"))?;
    let count = |key: &str, v: &Value| -> Result<u64, CliError> {
        v.as_u64().ok_or_else(|| parse_error(&format!("fixed.{key}"), "expected a non-negative integer"))
    };
    for (key, v) in obj {
        match key.as_str() {
            "sigma2" => hyper.sigma2 = Some(v.as_f64().ok_or_else(|| parse_error("fixed.sigma2", "expected a number"))?),
            "d" => hyper.d = Some(count(key, v)? as usize),
            "n" => hyper.n = Some(count(key, v)?),
            "k" => hyper.k = Some(count(key, v)? as usize),
            other => return Err(parse_error("fixed", format!("unknown hyperparameter `{other}`"))),
        }
    }
    Ok(hyper)
}

fn fixed_json(family: &Family) -> Option<Value> {
    let hyper = family.hyperparams();
    if hyper.is_empty() {
        return None;
    }
    let mut map = Map::new();
    for (key, v) in hyper {
        let value = if key == "sigma2" { json!(v) } else { json!(v as u64) };
        map.insert(key.to_string(), value);
    }
    Some(Value::Object(map))
}

fn family_from_json(obj: &Map<String, Value>) -> Result<Family, CliError> {
    let name = obj
        .get("family")
        .and_then(Value::as_str)
        .ok_or_else(|| parse_error("family", "missing or not a string"))?;
    family_from_name(name, &hyperparams_from_json(obj.get("fixed"))?)
}

fn space_from_json(obj: &Map<String, Value>) -> Result<Space, CliError> {
    let s = obj
        .get("space")
        .and_then(Value::as_str)
        .ok_or_else(|| parse_error("space", "missing or not a string"))?;
    Space::parse(s).ok_or_else(|| parse_error("space", format!("`{s}` is not source, natural or expectation")))
}

fn number(field: &str, v: &Value) -> Result<f64, CliError> {
    v.as_f64().ok_or_else(|| parse_error(field, "expected a number"))
}

fn numbers(field: &str, v: &Value, len: usize) -> Result<Vec<f64>, CliError> {
    let arr = v.as_array().ok_or_else(|| parse_error(field, "expected an array"))?;
    if arr.len() != len {
        return Err(parse_error(field, format!("expected {len} entries, got {}", arr.len())));
    }
    arr.iter().map(|x| number(field, x)).collect()
}

/// Reads the `params` object in field order. Matrices are nested row arrays
/// (a flat row-major array is also accepted).
fn params_from_json(family: &Family, space: Space, v: Option<&Value>) -> Result<Vec<f64>, CliError> {
    let obj = v
        .and_then(Value::as_object)
        .ok_or_else(|| parse_error("params", "missing or not an object"))?;
    let fields = family.fields(space);
    if let Some(extra) = obj.keys().find(|k| !fields.iter().any(|f| f.name == k.as_str())) {
        let names: Vec<&str> = fields.iter().map(|f| f.name).collect();
        return Err(parse_error("params", format!("unexpected field `{extra}` (expected {})", names.join(", "))));
    }
    let mut values = Vec::new();
    for f in fields {
        let name = format!("params.{}", f.name);
        let v = obj.get(f.name).ok_or_else(|| parse_error(&name, "missing"))?;
        match f.shape {
            Shape::Scalar => values.push(number(&name, v)?),
            Shape::Vector(n) => values.extend(numbers(&name, v, n)?),
            Shape::Matrix(d) => {
                let arr = v.as_array().ok_or_else(|| parse_error(&name, "expected an array"))?;
                if arr.first().is_some_and(Value::is_array) {
                    if arr.len() != d {
                        return Err(parse_error(&name, format!("expected {d} rows, got {}", arr.len())));
                    }
                    for row in arr {
                        values.extend(numbers(&name, row, d)?);
                    }
                } else {
                    values.extend(numbers(&name, v, d * d)?);
                }
            }
        }
    }
    Ok(values)
}

fn params_json(p: &ParamVector) -> Value {
    let mut map = Map::new();
    let mut rest = p.values();
    for f in p.family().fields(p.space()) {
        let (head, tail) = rest.split_at(f.shape.len());
        rest = tail;
        let value = match f.shape {
            Shape::Scalar => json!(head[0]),
            Shape::Vector(_) => json!(head),
            Shape::Matrix(d) => Value::Array(head.chunks(d).map(|row| json!(row)).collect()),
        };
        map.insert(f.name.to_string(), value);
    }
    Value::Object(map)
}

fn parse_object(text: &str) -> Result<Map<String, Value>, CliError> {
    let v: Value = serde_json::from_str(text).map_err(|e| CliError::Parse(format!("invalid JSON: {e}")))?;
    match v {
        Value::Object(obj) => Ok(obj),
        _ => Err(CliError::Parse("expected a JSON object".into())),
    }
}

/// `{"family", "space", "params", "fixed"}` to a validated parameter vector.
pub fn parse_distribution(text: &str) -> Result<ParamVector, CliError> {
    let obj = parse_object(text)?;
    let family = family_from_json(&obj)?;
    let space = space_from_json(&obj)?;
    let values = params_from_json(&family, space, obj.get("params"))?;
    Ok(ParamVector::new(family, space, values)?)
}

pub fn load_distribution(path: &Path) -> Result<ParamVector, CliError> {
    parse_distribution(&read_text(path)?)
}

pub fn distribution_json(p: &ParamVector) -> Value {
    let mut map = Map::new();
    map.insert("family".into(), json!(p.family().name()));
    map.insert("space".into(), json!(p.space().as_str()));
    map.insert("params".into(), params_json(p));
    if let Some(fixed) = fixed_json(&p.family()) {
        map.insert("fixed".into(), fixed);
    }
    Value::Object(map)
}

/// Mixture file to a model. Weights off by more than `1e-9` but at most
/// `1e-6` are renormalized with a warning on standard error.
pub fn parse_mixture(text: &str) -> Result<MixtureModel, CliError> {
    let obj = parse_object(text)?;
    let family = family_from_json(&obj)?;
    let comps = obj
        .get("components")
        .and_then(Value::as_array)
        .ok_or_else(|| parse_error("components", "missing or not an array"))?;
    let mut weights = Vec::with_capacity(comps.len());
    let mut params = Vec::with_capacity(comps.len());
    for (i, c) in comps.iter().enumerate() {
        let c = c
            .as_object()
            .ok_or_else(|| parse_error(&format!("components[{i}]"), "expected an object"))?;
        weights.push(number(&format!("components[{i}].weight"), c.get("weight").unwrap_or(&Value::Null))?);
        let space = space_from_json(c)?;
        let values = params_from_json(&family, space, c.get("params"))?;
        params.push(ParamVector::new(family, space, values)?);
    }
    let total: f64 = weights.iter().sum();
    let off = (total - 1.0).abs();
    if off > WEIGHT_WARN || !total.is_finite() {
        return Err(expfam::Error::Domain {
            field: "weights".into(),
            reason: format!("weights sum to {total}, not 1"),
        }
        .into());
    }
    if off > WEIGHT_SILENT {
        eprintln!("warning: mixture weights sum to {total}; renormalizing");
    }
    if off > 0.0 {
        for w in &mut weights {
            *w /= total;
        }
    }
    Ok(MixtureModel::new(family, weights, params)?)
}

pub fn load_mixture(path: &Path) -> Result<MixtureModel, CliError> {
    parse_mixture(&read_text(path)?)
}

/// Mixture file with components in source coordinates.
pub fn mixture_json(model: &MixtureModel) -> Result<Value, CliError> {
    let family = model.family();
    let mut map = Map::new();
    map.insert("family".into(), json!(family.name()));
    if let Some(fixed) = fixed_json(&family) {
        map.insert("fixed".into(), fixed);
    }
    let mut comps = Vec::with_capacity(model.k());
    for (w, c) in model.weights().iter().zip(model.components()) {
        let source = c.to_source()?;
        comps.push(json!({
            "weight": w,
            "space": "source",
            "params": params_json(&source),
        }));
    }
    map.insert("components".into(), Value::Array(comps));
    Ok(Value::Object(map))
}

/// One observation per row. A first row with any non-numeric cell is taken
/// as a header.
pub fn read_observations(path: &Path, dim: usize) -> Result<Vec<Observation>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if line == 0 => continue,
            Err(_) => {
                return Err(CliError::Parse(format!(
                    "{} line {}: non-numeric value",
                    path.display(),
                    line + 1
                )))
            }
        };
        if row.len() != dim {
            return Err(CliError::Parse(format!(
                "{} line {}: expected {dim} columns, got {}",
                path.display(),
                line + 1,
                row.len()
            )));
        }
        out.push(row);
    }
    Ok(out)
}

/// Header `x` (or `x1..xd`) and one row per observation, optionally with a
/// trailing component label column.
pub fn write_observations<W: Write>(
    out: W,
    dim: usize,
    data: &[Observation],
    labels: Option<&[usize]>,
) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_writer(out);
    let io_err = |e: csv::Error| CliError::Io(e.to_string());
    let mut header: Vec<String> = if dim == 1 {
        vec!["x".into()]
    } else {
        (1..=dim).map(|i| format!("x{i}")).collect()
    };
    if labels.is_some() {
        header.push("component".into());
    }
    writer.write_record(&header).map_err(io_err)?;
    for (i, x) in data.iter().enumerate() {
        let mut row: Vec<String> = x.iter().map(|v| fmt_num(*v)).collect();
        if let Some(labels) = labels {
            row.push(labels[i].to_string());
        }
        writer.write_record(&row).map_err(io_err)?;
    }
    writer.flush().map_err(|e| CliError::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digit_format() {
        assert_eq!(fmt_num(0.5), "0.5");
        assert_eq!(fmt_num(0.1), "0.10000000000000001");
        assert_eq!(fmt_num(3.0), "3");
        assert_eq!(fmt_num(-2.5e-7), "-2.4999999999999999e-7");
        assert_eq!(fmt_num(1e20), "1e20");
        assert_eq!(fmt_num(123456.75), "123456.75");
        assert_eq!(fmt_num(0.000125), "0.000125");
        for v in [0.1, 1.0 / 3.0, -7.25e-12, 6.02214076e23, f64::MIN_POSITIVE, 1234567.0] {
            assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn distribution_round_trip_is_byte_stable() {
        let text = r#"{"family":"multivariate_gaussian","space":"source","params":{"mu":[0.1,-2],"sigma":[[1,0.3],[0.3,2]]},"fixed":{"d":2}}"#;
        let p = parse_distribution(text).unwrap();
        let once = to_json(&distribution_json(&p));
        let twice = to_json(&distribution_json(&parse_distribution(&once).unwrap()));
        assert_eq!(once, twice);
        assert!(once.contains("\"mu\":[0.10000000000000001,-2]"));
    }

    #[test]
    fn aliases_and_errors() {
        let p = parse_distribution(r#"{"family":"gaussian","space":"source","params":{"mu":0,"sigma2":1}}"#).unwrap();
        assert_eq!(p.family(), Family::UnivariateGaussian);
        assert!(matches!(
            parse_distribution(r#"{"family":"poisson","space":"source","params":{"mu":1}}"#),
            Err(CliError::Parse(_))
        ));
        assert!(matches!(
            parse_distribution(r#"{"family":"poisson","space":"source","params":{"lambda":-1}}"#),
            Err(CliError::Lib(expfam::Error::Domain { .. }))
        ));
        assert!(matches!(parse_distribution("{"), Err(CliError::Parse(_))));
    }

    #[test]
    fn mixture_weights_policy() {
        let file = |w1: f64, w2: f64| {
            format!(
                r#"{{"family":"poisson","components":[{{"weight":{w1},"space":"source","params":{{"lambda":1}}}},{{"weight":{w2},"space":"source","params":{{"lambda":5}}}}]}}"#
            )
        };
        let m = parse_mixture(&file(0.5, 0.5 + 5e-7)).unwrap();
        assert!((m.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(matches!(parse_mixture(&file(0.5, 0.6)), Err(CliError::Lib(expfam::Error::Domain { .. }))));
        let text = to_json(&mixture_json(&m).unwrap());
        assert_eq!(parse_mixture(&text).unwrap().k(), 2);
    }
}
