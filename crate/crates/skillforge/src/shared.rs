//! Several simulated streams sharing one on-disk library.
//!
//! Worker `w` of `N` runs the tasks whose index is `w` modulo `N` and writes
//! its own ledger. Before each task it reads the library under the shared
//! lock; after the task it takes the exclusive lock, reloads the library,
//! applies the learning update and writes the result back. The directory is
//! the only shared state.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread;

use skillforge_core::sim::{learn, Agent, SimConfig, SimError, SyntheticTask};
use skillforge_core::{LearningEvent, LibraryStats, SkillLibrary};
use thiserror::Error;

use crate::ledger_csv::{LedgerIoError, LedgerWriter};
use crate::library_dir::{LibraryDir, LibraryError};

#[derive(Debug, Error)]
pub enum SharedError {
    #[error(transparent)]
    Config(#[from] SimError),
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error(transparent)]
    Ledger(#[from] LedgerIoError),
    #[error("worker count must be at least 1")]
    NoWorkers,
    #[error("a worker thread panicked")]
    Panicked,
}

#[derive(Debug)]
pub struct SharedRun {
    pub ledgers: Vec<PathBuf>,
    pub library: SkillLibrary,
    /// `(task_id, event)` in the order updates were applied.
    pub events: Vec<(String, LearningEvent)>,
    pub stats: LibraryStats,
}

/// `<stem>.wNN.csv` next to `out`.
pub fn worker_ledger_path(out: &Path, worker: usize) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("ledger");
    out.with_file_name(format!("{stem}.w{worker:02}.csv"))
}

/// What every worker reads.
struct Run<'a> {
    config: &'a SimConfig,
    seed: &'a SkillLibrary,
    tasks: &'a [SyntheticTask],
    dir: &'a LibraryDir,
    workers: usize,
    events: Mutex<Vec<(String, LearningEvent)>>,
}

fn worker(run: &Run, id: usize, path: &Path) -> Result<(), SharedError> {
    let Run { config, dir, events, .. } = run;
    let mut ledger = LedgerWriter::create(path)?;
    let mut agent = Agent::new(config, run.seed);
    for (index, task) in run.tasks.iter().enumerate().skip(id).step_by(run.workers) {
        let snapshot = dir.load()?;
        let run = agent.run_task(&snapshot, task, index);
        let today = task.date.unwrap_or_else(|| config.date_of(index));
        {
            let _guard = dir.lock_exclusive()?;
            let current = dir.load_unlocked()?;
            let (next, new_events) = learn(config, &current, &run, today);
            if next != current {
                dir.save_unlocked(&next)?;
            }
            let mut log = events.lock().map_err(|_| SharedError::Panicked)?;
            log.extend(new_events.into_iter().map(|e| (task.task_id.clone(), e)));
        }
        for row in &run.rows {
            ledger.write(row)?;
        }
    }
    ledger.flush()?;
    Ok(())
}

/// Runs `tasks` on `workers` threads against the library in `dir`, which is
/// initialized from `seed` first.
pub fn run_shared(
    config: &SimConfig,
    seed: &SkillLibrary,
    tasks: &[SyntheticTask],
    dir: &LibraryDir,
    out: &Path,
    workers: usize,
) -> Result<SharedRun, SharedError> {
    if workers == 0 {
        return Err(SharedError::NoWorkers);
    }
    config.validate()?;
    dir.save(seed)?;
    let ledgers: Vec<PathBuf> = (0..workers).map(|w| worker_ledger_path(out, w)).collect();
    let run = Run { config, seed, tasks, dir, workers, events: Mutex::new(Vec::new()) };
    let results: Vec<Result<(), SharedError>> = thread::scope(|s| {
        let handles: Vec<_> = ledgers
            .iter()
            .enumerate()
            .map(|(w, path)| {
                let run = &run;
                s.spawn(move || worker(run, w, path))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap_or(Err(SharedError::Panicked))).collect()
    });
    for r in results {
        r?;
    }
    let library = dir.load()?;
    let events = run.events.into_inner().map_err(|_| SharedError::Panicked)?;
    let all: Vec<LearningEvent> = events.iter().map(|(_, e)| e.clone()).collect();
    let stats = LibraryStats::from_events(seed.routine_count(), &all, library.routine_count());
    Ok(SharedRun { ledgers, library, events, stats })
}
