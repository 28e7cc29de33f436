//! Verifier adapter that shells out to an external command.

use super::{VerdictStatus, VerifierBackend, VerifierVerdict};
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

/// Spawns a configured command template per verification.
///
/// The template is split on whitespace; every `{file}` token is replaced by
/// the target path. When a lemma filter is requested and `filter_option` is
/// set, `filter_option` and the lemma name are appended as two extra
/// arguments. Verified means exit status zero; stdout and stderr are captured
/// verbatim into the verdict.
#[derive(Debug, Clone)]
pub struct ProcessVerifier {
    pub command: Vec<String>,
    pub filter_option: Option<String>,
}

impl ProcessVerifier {
    /// `command` is e.g. `"dafny verify --allow-warnings {file}"`.
    pub fn new(command: &str, filter_option: Option<String>) -> Self {
        ProcessVerifier {
            command: command.split_whitespace().map(str::to_owned).collect(),
            filter_option,
        }
    }

    fn build_args(&self, file: &Path, lemma_filter: Option<&str>) -> Option<Vec<String>> {
        if self.command.is_empty() {
            return None;
        }
        let mut args: Vec<String> = self
            .command
            .iter()
            .map(|tok| tok.replace("{file}", &file.display().to_string()))
            .collect();
        if let (Some(option), Some(lemma)) = (&self.filter_option, lemma_filter) {
            args.push(option.clone());
            args.push(lemma.to_owned());
        }
        Some(args)
    }
}

impl VerifierBackend for ProcessVerifier {
    fn verify(
        &self,
        file: &Path,
        lemma_filter: Option<&str>,
        timeout: Duration,
    ) -> VerifierVerdict {
        let start = Instant::now();
        let Some(args) = self.build_args(file, lemma_filter) else {
            return VerifierVerdict::new(
                VerdictStatus::Crashed("empty verifier command".to_owned()),
                start.elapsed(),
            );
        };

        let spawned = Command::new(&args[0])
            .args(&args[1..])
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn();
        let mut child = match spawned {
            Ok(c) => c,
            Err(e) => {
                return VerifierVerdict::new(
                    VerdictStatus::Crashed(format!("failed to spawn `{}`: {e}", args[0])),
                    start.elapsed(),
                )
            }
        };

        // Enforce the wall clock by polling; on expiry the child is killed.
        let deadline = start + timeout;
        loop {
            match child.try_wait() {
                Ok(Some(_)) => break,
                Ok(None) => {
                    if Instant::now() >= deadline {
                        let _ = child.kill();
                        let _ = child.wait();
                        return VerifierVerdict::new(VerdictStatus::Timeout, start.elapsed());
                    }
                    std::thread::sleep(Duration::from_millis(10));
                }
                Err(e) => {
                    return VerifierVerdict::new(
                        VerdictStatus::Crashed(format!("wait failed: {e}")),
                        start.elapsed(),
                    )
                }
            }
        }

        let output = match child.wait_with_output() {
            Ok(o) => o,
            Err(e) => {
                return VerifierVerdict::new(
                    VerdictStatus::Crashed(format!("output capture failed: {e}")),
                    start.elapsed(),
                )
            }
        };
        let mut text = String::from_utf8_lossy(&output.stdout).into_owned();
        let stderr = String::from_utf8_lossy(&output.stderr);
        if !stderr.trim().is_empty() {
            if !text.is_empty() {
                text.push('\n');
            }
            text.push_str(&stderr);
        }
        let status = if output.status.success() {
            VerdictStatus::Verified
        } else {
            VerdictStatus::Failed(text)
        };
        VerifierVerdict::new(status, start.elapsed())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_exit_is_verified() {
        let v = ProcessVerifier::new("true", None);
        let verdict = v.verify(Path::new("/dev/null"), None, Duration::from_secs(5));
        assert!(verdict.status.is_verified());
    }

    #[test]
    fn nonzero_exit_is_failed() {
        let v = ProcessVerifier::new("false", None);
        let verdict = v.verify(Path::new("/dev/null"), None, Duration::from_secs(5));
        assert!(matches!(verdict.status, VerdictStatus::Failed(_)));
    }

    #[test]
    fn missing_binary_is_crashed() {
        let v = ProcessVerifier::new("definitely-not-a-real-verifier-binary {file}", None);
        let verdict = v.verify(Path::new("/dev/null"), None, Duration::from_secs(5));
        assert!(matches!(verdict.status, VerdictStatus::Crashed(_)));
    }

    #[test]
    fn wall_clock_timeout_kills_the_child() {
        let v = ProcessVerifier::new("sleep 5", None);
        let verdict = v.verify(Path::new("/dev/null"), None, Duration::from_millis(50));
        assert_eq!(verdict.status, VerdictStatus::Timeout);
        assert!(verdict.duration < Duration::from_secs(2));
    }

    #[test]
    fn filter_appends_option_and_lemma() {
        let v = ProcessVerifier::new("verify {file}", Some("--filter-symbol".into()));
        let args = v.build_args(Path::new("a.dfy"), Some("LemmaX")).unwrap();
        assert_eq!(args, vec!["verify", "a.dfy", "--filter-symbol", "LemmaX"]);
        let args = v.build_args(Path::new("a.dfy"), None).unwrap();
        assert_eq!(args, vec!["verify", "a.dfy"]);
    }
}
