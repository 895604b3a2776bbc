//! `--config FILE`: a JSON object whose keys mirror the long flags of the
//! chosen subcommand. Its entries are spliced in before the explicit flags,
//! which therefore take precedence.

use srpac_core::Error;

const SUBCOMMANDS: [&str; 8] = ["plan", "table1", "simulate", "verify", "maps", "snr", "localize", "replay"];

pub fn expand_config(argv: Vec<String>) -> Result<Vec<String>, Error> {
    let Some(pos) = argv.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(argv);
    };
    let (path, drop) = if let Some(p) = argv[pos].strip_prefix("--config=") {
        (p.to_string(), 1)
    } else {
        let p = argv.get(pos + 1).ok_or_else(|| Error::Input("--config needs a file".into()))?;
        (p.clone(), 2)
    };
    let mut rest: Vec<String> = argv.clone();
    rest.drain(pos..pos + drop);
    let text = std::fs::read_to_string(&path)?;
    let tokens = json_to_flags(&serde_json::from_str(&text)?)?;
    let sub = rest
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.as_str()))
        .ok_or_else(|| Error::Input("--config needs a subcommand".into()))?;
    let mut out: Vec<String> = rest[..=sub].to_vec();
    out.extend(tokens);
    out.extend_from_slice(&rest[sub + 1..]);
    Ok(out)
}

fn json_to_flags(v: &serde_json::Value) -> Result<Vec<String>, Error> {
    let obj = v.as_object().ok_or_else(|| Error::Input("config file must hold a JSON object".into()))?;
    let mut out = Vec::new();
    for (k, v) in obj {
        let flag = format!("--{}", k.replace('_', "-"));
        match v {
            serde_json::Value::Bool(true) => out.push(flag),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            serde_json::Value::String(s) => {
                out.push(flag);
                out.push(s.clone());
            }
            serde_json::Value::Number(n) => {
                out.push(flag);
                out.push(n.to_string());
            }
            serde_json::Value::Array(a) => {
                let parts: Vec<String> = a.iter().map(|x| x.as_str().map(str::to_string).unwrap_or_else(|| x.to_string())).collect();
                out.push(flag);
                out.push(parts.join(","));
            }
            serde_json::Value::Object(_) => return Err(Error::Input(format!("config key '{k}' cannot be an object"))),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_follow_subcommand() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"epsilon": 0.01, "strict_cubic": true, "nd": [1, 2]}"#).unwrap();
        let argv = vec!["srpac".into(), "--config".into(), p.to_string_lossy().into(), "plan".into(), "--r".into(), "3".into()];
        let out = expand_config(argv).unwrap();
        assert_eq!(out[1], "plan");
        assert!(out.windows(2).any(|w| w[0] == "--epsilon" && w[1] == "0.01"));
        assert!(out.contains(&"--strict-cubic".to_string()));
        assert!(out.windows(2).any(|w| w[0] == "--nd" && w[1] == "1,2"));
        assert_eq!(out[out.len() - 2..], ["--r".to_string(), "3".to_string()]);
    }
}
