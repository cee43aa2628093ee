use fofe::ForgettingFactor;

/// Values are rounded to this many decimals so `0.1:0.9:0.1` gives `0.3`,
/// not `0.30000000000000004`.
const DECIMALS: i32 = 12;

fn round(v: f64) -> f64 {
    let scale = 10f64.powi(DECIMALS);
    (v * scale).round() / scale
}

fn number(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("'{s}' is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("'{s}' is not finite"))
    }
}

/// `start:stop:step` (both ends inclusive, within 1e-12) or a comma list.
pub fn parse_values(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [single] => single.split(',').map(number).collect(),
        [start, stop, step] => {
            let (start, stop, step) = (number(start)?, number(stop)?, number(step)?);
            if step <= 0.0 {
                return Err(format!("range step must be positive, got {step}"));
            }
            if stop < start {
                return Err(format!("range stop {stop} is below start {start}"));
            }
            let count = ((stop - start) / step + 1e-12).floor() as usize + 1;
            if count > 1_000_000 {
                return Err(format!("range has {count} values"));
            }
            Ok((0..count).map(|i| round(start + i as f64 * step)).collect())
        }
        _ => Err(format!("'{s}' is neither start:stop:step nor a comma list")),
    }
}

pub fn parse_alphas(s: &str) -> Result<Vec<ForgettingFactor>, String> {
    parse_values(s)?
        .into_iter()
        .map(|v| ForgettingFactor::new(v).map_err(|e| e.to_string()))
        .collect()
}

pub fn parse_alpha(s: &str) -> Result<ForgettingFactor, String> {
    s.parse::<ForgettingFactor>().map_err(|e| e.to_string())
}

pub fn parse_epsilons(s: &str) -> Result<Vec<f64>, String> {
    let values = parse_values(s)?;
    match values.iter().find(|&&e| e <= 0.0) {
        Some(e) => Err(format!("epsilon must be positive, got {e}")),
        None => Ok(values),
    }
}

pub fn parse_dims(s: &str) -> Result<Vec<usize>, String> {
    s.split(',')
        .map(|d| match d.trim().parse::<usize>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(format!("'{d}' is not a positive layer width")),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inclusive_ranges() {
        let v = parse_values("0.55:0.95:0.05").unwrap();
        assert_eq!(v.len(), 9);
        assert_eq!(v[0], 0.55);
        assert_eq!(v[2], 0.65);
        assert_eq!(v[8], 0.95);
        assert_eq!(parse_values("0.1:1.0:0.1").unwrap().len(), 10);
        assert_eq!(parse_values("0.1:0.9:0.1").unwrap()[2], 0.3);
        assert_eq!(parse_values("1:1:0.5").unwrap(), vec![1.0]);
    }

    #[test]
    fn lists_and_errors() {
        assert_eq!(parse_values("1e-2,1e-3,1e-4").unwrap(), vec![0.01, 0.001, 0.0001]);
        assert!(parse_values("0.1:0.2").is_err());
        assert!(parse_values("0.5:0.1:0.1").is_err());
        assert!(parse_values("0:1:0").is_err());
        assert!(parse_values("abc").is_err());
        assert!(parse_epsilons("0.1,0").is_err());
    }

    #[test]
    fn alpha_lists_enforce_open_interval() {
        assert_eq!(parse_alphas("0.1:0.9:0.1").unwrap().len(), 9);
        let err = parse_alphas("0.1:1.0:0.1").unwrap_err();
        assert!(err.contains("(0, 1)"), "{err}");
        assert!(parse_alpha("1.5").unwrap_err().contains("(0, 1)"));
    }

    #[test]
    fn dims() {
        assert_eq!(parse_dims("64,64").unwrap(), vec![64, 64]);
        assert!(parse_dims("64,0").is_err());
    }
}
