use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use ratqual_core::error::Error;
use ratqual_core::monitoring::SnapshotStore;
use ratqual_core::scope::{is_file_safe_id, load_scope, save_scope, CollaborationScope};

use crate::error::ApiError;

/// Scope documents and snapshot stores under one data directory:
/// `scopes/<id>.toml` and `snapshots/<id>.jsonl`.
#[derive(Clone, Debug)]
pub struct Repository {
    home: PathBuf,
}

impl Repository {
    pub fn new(home: impl Into<PathBuf>) -> Self {
        Repository { home: home.into() }
    }

    pub fn home(&self) -> &Path {
        &self.home
    }

    pub fn scope_path(&self, scope_id: &str) -> PathBuf {
        self.home.join("scopes").join(format!("{scope_id}.toml"))
    }

    pub fn snapshots(&self, scope_id: &str) -> SnapshotStore {
        SnapshotStore::for_scope(&self.home, scope_id)
    }

    pub fn list(&self) -> Result<Vec<CollaborationScope>, ApiError> {
        let entries = match fs::read_dir(self.home.join("scopes")) {
            Ok(entries) => entries,
            Err(e) if e.kind() == ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(Error::from(e).into()),
        };
        let mut scopes = Vec::new();
        for entry in entries {
            let path = entry.map_err(Error::from)?.path();
            if path.extension().is_some_and(|ext| ext == "toml") {
                scopes.push(load_scope(&path).map_err(|e| stored_scope_error(&path, e))?);
            }
        }
        scopes.sort_by(|a, b| a.scope_id.cmp(&b.scope_id));
        Ok(scopes)
    }

    pub fn find(&self, scope_id: &str) -> Result<Option<CollaborationScope>, ApiError> {
        if !is_file_safe_id(scope_id) {
            return Ok(None);
        }
        let path = self.scope_path(scope_id);
        if !path.exists() {
            return Ok(None);
        }
        load_scope(&path)
            .map(Some)
            .map_err(|e| stored_scope_error(&path, e))
    }

    pub fn get(&self, scope_id: &str) -> Result<CollaborationScope, ApiError> {
        self.find(scope_id)?
            .ok_or_else(|| ApiError::not_found(format!("no scope `{scope_id}`")))
    }

    /// Stores a new scope; the caller holds the write lock.
    pub fn create(&self, scope: &CollaborationScope) -> Result<(), ApiError> {
        if self.find(&scope.scope_id)?.is_some() {
            return Err(ApiError::conflict(format!(
                "scope `{}` already exists",
                scope.scope_id
            )));
        }
        save_scope(scope, &self.scope_path(&scope.scope_id))?;
        Ok(())
    }

    /// Replaces a scope if `update.revision` still matches the stored one, and
    /// returns the stored document with its revision bumped.
    pub fn update(
        &self,
        scope_id: &str,
        mut update: CollaborationScope,
    ) -> Result<CollaborationScope, ApiError> {
        if update.scope_id != scope_id {
            return Err(ApiError::validation(format!(
                "document scope_id `{}` does not match `{scope_id}`",
                update.scope_id
            )));
        }
        let current = self.get(scope_id)?;
        if update.revision != current.revision {
            return Err(ApiError::conflict(format!(
                "stale revision {} (current is {})",
                update.revision, current.revision
            )));
        }
        update.revision += 1;
        save_scope(&update, &self.scope_path(scope_id))?;
        Ok(update)
    }
}

// A stored document that no longer loads is a server-side problem, not the caller's.
fn stored_scope_error(path: &Path, err: Error) -> ApiError {
    match err {
        Error::Io(_) => err.into(),
        other => ApiError::new(
            crate::error::ErrorCode::Internal,
            format!("stored scope {} is unreadable: {other}", path.display()),
        ),
    }
}
