//! Users, roles and bearer tokens.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Duration, Utc};
use parking_lot::{Mutex, RwLock};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use subtle::ConstantTimeEq;
use thiserror::Error;

use crate::storage::{RecordDir, StorageError};

pub const DEFAULT_TOKEN_TTL_SECS: u64 = 3600;
const HASH_ROUNDS: u32 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Admin,
    Developer,
    Enduser,
}

impl Role {
    pub const ALL: [Role; 3] = [Role::Admin, Role::Developer, Role::Enduser];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Admin => "admin",
            Role::Developer => "developer",
            Role::Enduser => "enduser",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Role::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown role `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    pub username: String,
    pub role: Role,
    salt: String,
    password_hash: String,
}

impl User {
    pub fn is_admin(&self) -> bool {
        self.role == Role::Admin
    }

    /// A user that exists only in memory; used by in-process callers and tests.
    pub fn ephemeral(username: &str, role: Role) -> Self {
        Self {
            username: username.to_string(),
            role,
            salt: String::new(),
            password_hash: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub access_token: String,
    pub subject: String,
    pub expires_at: DateTime<Utc>,
}

#[derive(Debug, Error)]
pub enum AuthError {
    #[error("invalid username or password")]
    InvalidCredentials,
    #[error("missing, unknown or expired token")]
    InvalidToken,
    #[error("user `{0}` already exists")]
    UserExists(String),
    #[error("invalid username `{0}`")]
    InvalidUsername(String),
    #[error(transparent)]
    Storage(#[from] StorageError),
}

fn hash_password(salt: &[u8], password: &str) -> [u8; 32] {
    let mut digest: [u8; 32] = Sha256::new()
        .chain_update(salt)
        .chain_update(password.as_bytes())
        .finalize()
        .into();
    for _ in 1..HASH_ROUNDS {
        digest = Sha256::new()
            .chain_update(salt)
            .chain_update(digest)
            .finalize()
            .into();
    }
    digest
}

fn random_hex(bytes: usize) -> String {
    let mut buf = vec![0u8; bytes];
    rand::rng().fill_bytes(&mut buf);
    hex::encode(buf)
}

pub fn valid_username(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 64
        && name
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b"_.-".contains(&b))
        && !name.starts_with('.')
}

/// User accounts plus the server-side token table.
pub struct Auth {
    users: RwLock<HashMap<String, User>>,
    store: RecordDir,
    tokens: Mutex<HashMap<String, Token>>,
    ttl: Duration,
    dummy_salt: Vec<u8>,
}

impl Auth {
    pub fn open(store: RecordDir, token_ttl_secs: u64) -> Result<Self, AuthError> {
        let users = store
            .load_all::<User>()?
            .into_iter()
            .map(|u| (u.username.clone(), u))
            .collect();
        Ok(Self {
            users: RwLock::new(users),
            store,
            tokens: Mutex::new(HashMap::new()),
            ttl: Duration::seconds(token_ttl_secs as i64),
            dummy_salt: random_hex(16).into_bytes(),
        })
    }

    pub fn create_user(&self, username: &str, password: &str, role: Role) -> Result<User, AuthError> {
        if !valid_username(username) {
            return Err(AuthError::InvalidUsername(username.to_string()));
        }
        let mut users = self.users.write();
        if users.contains_key(username) {
            return Err(AuthError::UserExists(username.to_string()));
        }
        let salt = random_hex(16);
        let user = User {
            username: username.to_string(),
            role,
            password_hash: hex::encode(hash_password(salt.as_bytes(), password)),
            salt,
        };
        self.store.write(username, &user)?;
        users.insert(username.to_string(), user.clone());
        Ok(user)
    }

    /// Creates the `admin` account when absent. Returns the password when a
    /// new account was made (generated unless one was supplied).
    pub fn ensure_admin(&self, password: Option<&str>) -> Result<Option<String>, AuthError> {
        if self.users.read().contains_key("admin") {
            return Ok(None);
        }
        let password = password.map(str::to_string).unwrap_or_else(|| random_hex(12));
        match self.create_user("admin", &password, Role::Admin) {
            Ok(_) => Ok(Some(password)),
            Err(AuthError::UserExists(_)) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn user(&self, username: &str) -> Option<User> {
        self.users.read().get(username).cloned()
    }

    pub fn users(&self) -> Vec<User> {
        let mut all: Vec<User> = self.users.read().values().cloned().collect();
        all.sort_by(|a, b| a.username.cmp(&b.username));
        all
    }

    /// Checks credentials and issues a bearer token. Unknown users still pay
    /// for a full hash so both failure paths take the same time.
    pub fn login(&self, username: &str, password: &str) -> Result<Token, AuthError> {
        let user = self.user(username);
        let (salt, expected) = match &user {
            Some(u) => (u.salt.as_bytes().to_vec(), hex::decode(&u.password_hash).unwrap_or_default()),
            None => (self.dummy_salt.clone(), vec![0u8; 32]),
        };
        let actual = hash_password(&salt, password);
        let matches: bool = actual.ct_eq(expected.as_slice()).into();
        if !(matches && user.is_some()) {
            return Err(AuthError::InvalidCredentials);
        }
        let token = Token {
            access_token: random_hex(32),
            subject: username.to_string(),
            expires_at: Utc::now() + self.ttl,
        };
        self.tokens
            .lock()
            .insert(token.access_token.clone(), token.clone());
        Ok(token)
    }

    pub fn token_ttl_secs(&self) -> i64 {
        self.ttl.num_seconds()
    }

    /// Resolves a bearer token to its user, dropping it if expired.
    pub fn authenticate(&self, access_token: &str) -> Result<User, AuthError> {
        let mut tokens = self.tokens.lock();
        let token = tokens.get(access_token).ok_or(AuthError::InvalidToken)?;
        if Utc::now() >= token.expires_at {
            tokens.remove(access_token);
            return Err(AuthError::InvalidToken);
        }
        let subject = token.subject.clone();
        drop(tokens);
        self.user(&subject).ok_or(AuthError::InvalidToken)
    }

    pub fn revoke(&self, access_token: &str) {
        self.tokens.lock().remove(access_token);
    }
}
