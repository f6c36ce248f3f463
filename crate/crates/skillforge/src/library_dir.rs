//! A skill library on disk:
//!
//! ```text
//! <root>/rules/*.md
//! <root>/routines/*.md
//! <root>/demoted.md
//! <root>/reflections.md
//! <root>/.lock
//! ```
//!
//! Writers hold an exclusive advisory lock on `.lock` for the whole update;
//! readers hold a shared one.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io;
use std::path::{Path, PathBuf};

use skillforge_core::{DemotionEntry, LibraryViolation, RoutineSkill, RuleSkill, SkillLibrary};
use thiserror::Error;

use crate::format::{
    parse_demoted_log, parse_routine, parse_rule, serialize_demoted_log, serialize_demotion_entry, serialize_routine,
    serialize_rule, FormatError,
};

pub const RULES_DIR: &str = "rules";
pub const ROUTINES_DIR: &str = "routines";
pub const DEMOTED_FILE: &str = "demoted.md";
pub const REFLECTIONS_FILE: &str = "reflections.md";
pub const LOCK_FILE: &str = ".lock";

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{}", render_diagnostics(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("{path}: the demotion log is append-only and the new blacklist does not extend it")]
    NotAppendOnly { path: PathBuf },
}

impl LibraryError {
    fn io(path: &Path, source: io::Error) -> Self {
        LibraryError::Io { path: path.to_path_buf(), source }
    }
}

/// One problem found while reading a library directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub path: PathBuf,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path.display(), self.message)
    }
}

fn render_diagnostics(d: &[Diagnostic]) -> String {
    d.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")
}

/// Everything read from a directory, including files that failed to parse.
#[derive(Debug, Default)]
pub struct Scan {
    pub rules: Vec<(PathBuf, RuleSkill)>,
    pub routines: Vec<(PathBuf, RoutineSkill)>,
    pub blacklist: Vec<DemotionEntry>,
    pub reflections: Option<String>,
    pub diagnostics: Vec<Diagnostic>,
}

impl Scan {
    /// Assembles the library, adding invariant violations to the diagnostics.
    pub fn into_library(self) -> Result<SkillLibrary, Vec<Diagnostic>> {
        let mut diagnostics = self.diagnostics;
        let paths: BTreeMap<String, PathBuf> = self
            .rules
            .iter()
            .map(|(p, r)| (r.id.clone(), p.clone()))
            .chain(self.routines.iter().map(|(p, r)| (r.id.clone(), p.clone())))
            .collect();
        let rules = self.rules.into_iter().map(|(_, r)| r).collect();
        let routines = self.routines.into_iter().map(|(_, r)| r).collect();
        let lib = SkillLibrary::from_parts(rules, routines, self.blacklist);
        match lib {
            Ok(lib) if diagnostics.is_empty() => Ok(lib),
            Ok(_) => Err(diagnostics),
            Err(violations) => {
                for v in violations {
                    let id = match &v {
                        LibraryViolation::SharedId(id)
                        | LibraryViolation::ActiveBlacklisted(id)
                        | LibraryViolation::InvalidRoutine(id, _) => id.clone(),
                    };
                    let path = paths.get(&id).cloned().unwrap_or_default();
                    diagnostics.push(Diagnostic { path, message: v.to_string() });
                }
                Err(diagnostics)
            }
        }
    }
}

/// Holds the advisory lock until dropped.
#[derive(Debug)]
pub struct LibraryLock {
    file: File,
}

impl Drop for LibraryLock {
    fn drop(&mut self) {
        let _ = self.file.unlock();
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LibraryDir {
    root: PathBuf,
}

fn md_files(dir: &Path) -> Result<Vec<PathBuf>, LibraryError> {
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(LibraryError::io(dir, e)),
    };
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| LibraryError::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "md") && path.is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn read_optional(path: &Path) -> Result<Option<String>, LibraryError> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(Some(s)),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(LibraryError::io(path, e)),
    }
}

/// Write-then-rename so readers never see a half-written file.
fn write_atomic(path: &Path, contents: &str) -> Result<(), LibraryError> {
    let tmp = path.with_extension("md.tmp");
    fs::write(&tmp, contents).map_err(|e| LibraryError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| LibraryError::io(path, e))
}

fn diag(path: &Path, e: FormatError) -> Diagnostic {
    Diagnostic { path: path.to_path_buf(), message: e.to_string() }
}

impl LibraryDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        LibraryDir { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn rule_path(&self, id: &str) -> PathBuf {
        self.root.join(RULES_DIR).join(format!("{id}.md"))
    }

    pub fn routine_path(&self, id: &str) -> PathBuf {
        self.root.join(ROUTINES_DIR).join(format!("{id}.md"))
    }

    pub fn demoted_path(&self) -> PathBuf {
        self.root.join(DEMOTED_FILE)
    }

    /// Creates the directory skeleton if missing.
    pub fn create(&self) -> Result<(), LibraryError> {
        for d in [self.root.join(RULES_DIR), self.root.join(ROUTINES_DIR)] {
            fs::create_dir_all(&d).map_err(|e| LibraryError::io(&d, e))?;
        }
        Ok(())
    }

    fn lock_file(&self) -> Result<File, LibraryError> {
        fs::create_dir_all(&self.root).map_err(|e| LibraryError::io(&self.root, e))?;
        let path = self.root.join(LOCK_FILE);
        OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)
            .map_err(|e| LibraryError::io(&path, e))
    }

    pub fn lock_exclusive(&self) -> Result<LibraryLock, LibraryError> {
        let file = self.lock_file()?;
        file.lock().map_err(|e| LibraryError::io(&self.root.join(LOCK_FILE), e))?;
        Ok(LibraryLock { file })
    }

    pub fn lock_shared(&self) -> Result<LibraryLock, LibraryError> {
        let file = self.lock_file()?;
        file.lock_shared().map_err(|e| LibraryError::io(&self.root.join(LOCK_FILE), e))?;
        Ok(LibraryLock { file })
    }

    /// Reads every file without taking the lock. Parse failures become
    /// diagnostics; only I/O failures are errors.
    pub fn scan_unlocked(&self) -> Result<Scan, LibraryError> {
        if !self.root.is_dir() {
            return Err(LibraryError::io(&self.root, io::Error::new(io::ErrorKind::NotFound, "library directory not found")));
        }
        let mut scan = Scan::default();
        for path in md_files(&self.root.join(RULES_DIR))? {
            let text = fs::read_to_string(&path).map_err(|e| LibraryError::io(&path, e))?;
            match parse_rule(&text) {
                Ok(r) => scan.rules.push((path, r)),
                Err(e) => scan.diagnostics.push(diag(&path, e)),
            }
        }
        for path in md_files(&self.root.join(ROUTINES_DIR))? {
            let text = fs::read_to_string(&path).map_err(|e| LibraryError::io(&path, e))?;
            match parse_routine(&text) {
                Ok(r) => scan.routines.push((path, r)),
                Err(e) => scan.diagnostics.push(diag(&path, e)),
            }
        }
        let demoted = self.demoted_path();
        if let Some(text) = read_optional(&demoted)? {
            match parse_demoted_log(&text) {
                Ok(entries) => scan.blacklist = entries,
                Err(e) => scan.diagnostics.push(diag(&demoted, e)),
            }
        }
        scan.reflections = read_optional(&self.root.join(REFLECTIONS_FILE))?;
        Ok(scan)
    }

    pub fn scan(&self) -> Result<Scan, LibraryError> {
        let _guard = self.lock_shared()?;
        self.scan_unlocked()
    }

    pub fn load_unlocked(&self) -> Result<SkillLibrary, LibraryError> {
        self.scan_unlocked()?.into_library().map_err(LibraryError::Invalid)
    }

    pub fn load(&self) -> Result<SkillLibrary, LibraryError> {
        let _guard = self.lock_shared()?;
        self.load_unlocked()
    }

    /// Writes `library` under the exclusive lock.
    pub fn save(&self, library: &SkillLibrary) -> Result<(), LibraryError> {
        let _guard = self.lock_exclusive()?;
        self.save_unlocked(library)
    }

    /// Brings the directory in line with `library`: blacklist first (append
    /// only), then routines (removed ids are deleted), then rules. The
    /// caller must hold the exclusive lock.
    pub fn save_unlocked(&self, library: &SkillLibrary) -> Result<(), LibraryError> {
        self.create()?;
        let demoted = self.demoted_path();
        let on_disk = match read_optional(&demoted)? {
            Some(text) => Some(parse_demoted_log(&text).map_err(|e| LibraryError::Invalid(vec![diag(&demoted, e)]))?),
            None => None,
        };
        match on_disk {
            None => write_atomic(&demoted, &serialize_demoted_log(library.blacklist()))?,
            Some(existing) => {
                let new = library.blacklist();
                if new.len() < existing.len() || new[..existing.len()] != existing[..] {
                    return Err(LibraryError::NotAppendOnly { path: demoted });
                }
                if new.len() > existing.len() {
                    use std::io::Write;
                    let mut f = OpenOptions::new().append(true).open(&demoted).map_err(|e| LibraryError::io(&demoted, e))?;
                    let tail: String = new[existing.len()..].iter().map(serialize_demotion_entry).collect();
                    f.write_all(tail.as_bytes()).map_err(|e| LibraryError::io(&demoted, e))?;
                    f.sync_data().map_err(|e| LibraryError::io(&demoted, e))?;
                }
            }
        }

        let mut existing: BTreeMap<String, PathBuf> = BTreeMap::new();
        for path in md_files(&self.root.join(ROUTINES_DIR))? {
            let text = fs::read_to_string(&path).map_err(|e| LibraryError::io(&path, e))?;
            if let Ok(r) = parse_routine(&text) {
                existing.insert(r.id, path);
            }
        }
        for r in library.routines() {
            let path = existing.remove(&r.id).unwrap_or_else(|| self.routine_path(&r.id));
            self.write_if_changed(&path, &serialize_routine(r))?;
        }
        for (_, path) in existing {
            fs::remove_file(&path).map_err(|e| LibraryError::io(&path, e))?;
        }

        let mut rule_paths: BTreeMap<String, PathBuf> = BTreeMap::new();
        for path in md_files(&self.root.join(RULES_DIR))? {
            let text = fs::read_to_string(&path).map_err(|e| LibraryError::io(&path, e))?;
            if let Ok(r) = parse_rule(&text) {
                rule_paths.insert(r.id, path);
            }
        }
        for r in library.rules() {
            let path = rule_paths.remove(&r.id).unwrap_or_else(|| self.rule_path(&r.id));
            self.write_if_changed(&path, &serialize_rule(r))?;
        }
        Ok(())
    }

    fn write_if_changed(&self, path: &Path, contents: &str) -> Result<(), LibraryError> {
        if read_optional(path)?.as_deref() == Some(contents) {
            return Ok(());
        }
        write_atomic(path, contents)
    }
}
