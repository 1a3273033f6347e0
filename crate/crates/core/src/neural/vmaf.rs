//! VMAF through an external tool.

use std::path::Path;

use serde_json::Value;

use super::{process, ProviderHandle, ProviderKind};
use crate::error::{Error, Result};
use crate::metrics::{mean, MetricValue};

/// Pooled VMAF from a tool log. Accepts the libvmaf v2 layout
/// (`pooled_metrics.vmaf.mean`), the older `aggregate.VMAF_score`, a
/// top-level `vmaf` number, and falls back to averaging `frames[].metrics.vmaf`.
pub fn parse_vmaf_json(text: &str) -> Option<f64> {
    let v: Value = serde_json::from_str(text).ok()?;
    let direct = v
        .pointer("/pooled_metrics/vmaf/mean")
        .or_else(|| v.pointer("/aggregate/VMAF_score"))
        .or_else(|| v.get("vmaf"))
        .or_else(|| v.get("VMAF score"))
        .and_then(Value::as_f64);
    if direct.is_some() {
        return direct;
    }
    let frames: Vec<f64> = v
        .get("frames")?
        .as_array()?
        .iter()
        .map(|f| f.pointer("/metrics/vmaf").and_then(Value::as_f64))
        .collect::<Option<_>>()?;
    (!frames.is_empty()).then(|| mean(&frames))
}

/// Run the VMAF command on two files and read the pooled score from `{out}`.
pub fn vmaf_adapter(h: &ProviderHandle, ref_path: &Path, dist_path: &Path) -> Result<MetricValue> {
    h.require(&[ProviderKind::Vmaf], "vmaf_adapter")?;
    let dir = tempfile::tempdir()?;
    let out = dir.path().join("vmaf.json");
    process::run(h, &[("ref", ref_path), ("dist", dist_path), ("out", &out)])?;
    let text = process::read_output(h, &out)?;
    let score = parse_vmaf_json(&text).ok_or_else(|| Error::Provider {
        provider: h.kind().to_string(),
        diagnostics: format!("no pooled vmaf score in tool output: {}", text.trim()),
    })?;
    Ok(MetricValue::scalar("vmaf", score))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn layouts() {
        assert_eq!(parse_vmaf_json(r#"{"pooled_metrics":{"vmaf":{"mean":73.921,"min":60}}}"#), Some(73.921));
        assert_eq!(parse_vmaf_json(r#"{"aggregate":{"VMAF_score":88.5}}"#), Some(88.5));
        assert_eq!(parse_vmaf_json(r#"{"vmaf": 12}"#), Some(12.0));
        assert_eq!(
            parse_vmaf_json(r#"{"frames":[{"metrics":{"vmaf":90}},{"metrics":{"vmaf":80}}]}"#),
            Some(85.0)
        );
        assert_eq!(parse_vmaf_json(r#"{"psnr": 30}"#), None);
        assert_eq!(parse_vmaf_json("garbage"), None);
    }

    #[test]
    fn missing_tool() {
        let err = ProviderHandle::command(ProviderKind::Vmaf, "/no/such/vmaf --ref {ref}", BTreeMap::new()).unwrap_err();
        assert_eq!(err.to_string(), "tool not found: /no/such/vmaf");
    }

    #[cfg(unix)]
    #[test]
    fn mocked_tool() {
        use std::os::unix::fs::PermissionsExt;
        let dir = tempfile::tempdir().unwrap();
        let tool = dir.path().join("vmaf");
        std::fs::write(
            &tool,
            "#!/bin/sh\nprintf '{\"pooled_metrics\":{\"vmaf\":{\"mean\":73.921}}}' > \"$6\"\n",
        )
        .unwrap();
        std::fs::set_permissions(&tool, std::fs::Permissions::from_mode(0o755)).unwrap();
        let h = ProviderHandle::command(
            ProviderKind::Vmaf,
            &format!("{} -r {{ref}} -d {{dist}} -o {{out}}", tool.display()),
            BTreeMap::new(),
        )
        .unwrap();
        let v = vmaf_adapter(&h, Path::new("a.y4m"), Path::new("b.y4m")).unwrap();
        assert_eq!(v.value, 73.921);

        let silent = dir.path().join("silent");
        std::fs::write(&silent, "#!/bin/sh\necho '{}' > \"$3\"\n").unwrap();
        std::fs::set_permissions(&silent, std::fs::Permissions::from_mode(0o755)).unwrap();
        let h = ProviderHandle::command(ProviderKind::Vmaf, &format!("{} {{ref}} {{dist}} {{out}}", silent.display()), BTreeMap::new()).unwrap();
        assert!(vmaf_adapter(&h, Path::new("a"), Path::new("b")).is_err());
    }
}
