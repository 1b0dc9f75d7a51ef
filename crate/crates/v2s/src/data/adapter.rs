//! Bridge to external video preprocessing tools.
//!
//! Real footage arrives in whatever format a face-tracking pipeline emits;
//! this crate only consumes its own frame container. The adapter runs a
//! user-supplied shell command that converts one raw video into that
//! container, then loads the result. The command is given as a template
//! with `{in}` and `{out}` placeholders, e.g.
//!
//! ```text
//! roi-extract --size 96 {in} {out}
//! ```
//!
//! When the tool fails, its captured stdout/stderr is surfaced in the
//! error so the user debugs the tool, not this crate.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::core::VideoClip;
use crate::data::load_video;
use crate::error::{Error, Result};

/// Longest tool-output excerpt echoed into an error message.
const DIAGNOSTIC_LIMIT: usize = 4096;

static NEXT_OUTPUT_ID: AtomicU64 = AtomicU64::new(0);

fn scratch_output_path() -> PathBuf {
    std::env::temp_dir().join(format!(
        "v2s-adapter-{}-{}.v2sf",
        std::process::id(),
        NEXT_OUTPUT_ID.fetch_add(1, Ordering::Relaxed)
    ))
}

/// Single-quotes a path for `sh -c`, so spaces and metacharacters in file
/// names pass through the template literally.
fn shell_quote(path: &Path) -> String {
    format!("'{}'", path.to_string_lossy().replace('\'', r"'\''"))
}

fn truncated(bytes: &[u8]) -> String {
    let text = String::from_utf8_lossy(bytes);
    if text.len() <= DIAGNOSTIC_LIMIT {
        text.into_owned()
    } else {
        format!("{}... [truncated]", &text[..DIAGNOSTIC_LIMIT])
    }
}

/// Runs `command_template` with `{in}` replaced by `raw_video_path` and
/// `{out}` by a scratch path, then loads the container the tool wrote.
///
/// The template must mention both placeholders; a tool that never sees
/// `{out}` has no way to hand its result back.
pub fn preprocess_adapter(command_template: &str, raw_video_path: &Path) -> Result<VideoClip> {
    for placeholder in ["{in}", "{out}"] {
        if !command_template.contains(placeholder) {
            return Err(Error::Adapter(format!(
                "command template {command_template:?} is missing the {placeholder} placeholder"
            )));
        }
    }

    let out_path = scratch_output_path();
    let cmdline = command_template
        .replace("{in}", &shell_quote(raw_video_path))
        .replace("{out}", &shell_quote(&out_path));

    let run = Command::new("sh")
        .arg("-c")
        .arg(&cmdline)
        .output()
        .map_err(|e| Error::Adapter(format!("could not spawn `sh -c {cmdline:?}`: {e}")));

    let result = run.and_then(|output| {
        if !output.status.success() {
            return Err(Error::Adapter(format!(
                "`{cmdline}` exited with {}\n--- captured output ---\n{}{}",
                output.status,
                truncated(&output.stdout),
                truncated(&output.stderr),
            )));
        }
        load_video(&out_path)
    });
    let _ = std::fs::remove_file(&out_path);
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::FRAME_RATE;
    use crate::data::save_video;
    use ndarray::Array3;

    fn sample_clip() -> VideoClip {
        // Exact multiples of 1/255 survive the byte container bitwise.
        let frames = Array3::from_shape_fn((3, 8, 8), |(t, i, j)| {
            ((t * 90 + i * 31 + j * 7) % 256) as f32 / 255.0
        });
        VideoClip::new(frames, FRAME_RATE).unwrap()
    }

    #[test]
    fn copy_command_round_trips_a_container() {
        let dir = tempfile::tempdir().unwrap();
        let raw = dir.path().join("raw input.v2sf"); // space exercises quoting
        save_video(&raw, &sample_clip()).unwrap();
        let clip = preprocess_adapter("cp {in} {out}", &raw).unwrap();
        assert_eq!(clip.frames(), sample_clip().frames());
    }

    #[test]
    fn failing_command_surfaces_its_diagnostics() {
        let err = preprocess_adapter(
            "echo boom-from-tool >&2; : {in} {out}; exit 3",
            Path::new("/nonexistent"),
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("boom-from-tool"), "{msg}");
        assert!(msg.contains("exit"), "{msg}");
    }

    #[test]
    fn malformed_tool_output_is_a_format_error() {
        let err = preprocess_adapter(
            "printf JUNKJUNKJUNKJUNK > {out}; : {in}",
            Path::new("/nonexistent"),
        )
        .unwrap_err();
        assert!(
            matches!(err, Error::Format(_)),
            "expected a format error, got {err}"
        );
    }

    #[test]
    fn template_without_placeholders_is_rejected() {
        let err = preprocess_adapter("convert --all", Path::new("x")).unwrap_err();
        assert!(err.to_string().contains("{in}"), "{err}");
        let err = preprocess_adapter("convert {in}", Path::new("x")).unwrap_err();
        assert!(err.to_string().contains("{out}"), "{err}");
    }
}
