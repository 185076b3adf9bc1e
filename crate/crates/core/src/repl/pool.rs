use std::collections::HashMap;
use std::ops::{Deref, DerefMut};
use std::sync::{Condvar, Mutex};

use super::{Compiler, SessionError};

type Factory<C> = dyn Fn(&str) -> Result<C, SessionError> + Send + Sync;

struct State<C> {
    idle: HashMap<String, Vec<C>>,
    live: usize,
}

/// Hands out sessions under exclusive leases. Sessions are keyed by their
/// import header and created on demand up to `capacity`.
pub struct SessionPool<C> {
    capacity: usize,
    factory: Box<Factory<C>>,
    state: Mutex<State<C>>,
    freed: Condvar,
}

/// An exclusively held session; goes back to the pool on drop.
pub struct Lease<'p, C: Compiler> {
    pool: &'p SessionPool<C>,
    header: String,
    session: Option<C>,
}

impl<C: Compiler> SessionPool<C> {
    pub fn new<F>(capacity: usize, factory: F) -> Self
    where
        F: Fn(&str) -> Result<C, SessionError> + Send + Sync + 'static,
    {
        SessionPool {
            capacity: capacity.max(1),
            factory: Box::new(factory),
            state: Mutex::new(State { idle: HashMap::new(), live: 0 }),
            freed: Condvar::new(),
        }
    }

    /// Block until a session for `header` is available.
    pub fn lease(&self, header: &str) -> Result<Lease<'_, C>, SessionError> {
        let mut st = self.state.lock().expect("pool lock");
        loop {
            if let Some(s) = st.idle.get_mut(header).and_then(Vec::pop) {
                return Ok(Lease { pool: self, header: header.to_string(), session: Some(s) });
            }
            if st.live >= self.capacity {
                // make room by retiring an idle session built for another header
                let other = st.idle.iter_mut().find(|(_, v)| !v.is_empty()).map(|(k, _)| k.clone());
                if let Some(k) = other {
                    st.idle.get_mut(&k).and_then(Vec::pop);
                    st.live -= 1;
                }
            }
            if st.live < self.capacity {
                st.live += 1;
                drop(st);
                return match (self.factory)(header) {
                    Ok(s) => Ok(Lease { pool: self, header: header.to_string(), session: Some(s) }),
                    Err(e) => {
                        self.state.lock().expect("pool lock").live -= 1;
                        self.freed.notify_one();
                        Err(e)
                    }
                };
            }
            st = self.freed.wait(st).expect("pool lock");
        }
    }

    pub fn live(&self) -> usize {
        self.state.lock().expect("pool lock").live
    }
}

impl<C: Compiler> Lease<'_, C> {
    /// Drop the session instead of returning it, e.g. after it misbehaved.
    pub fn discard(mut self) {
        self.session = None;
        self.pool.state.lock().expect("pool lock").live -= 1;
        self.pool.freed.notify_one();
    }
}

impl<C: Compiler> Deref for Lease<'_, C> {
    type Target = C;
    fn deref(&self) -> &C {
        self.session.as_ref().expect("leased session")
    }
}

impl<C: Compiler> DerefMut for Lease<'_, C> {
    fn deref_mut(&mut self) -> &mut C {
        self.session.as_mut().expect("leased session")
    }
}

impl<C: Compiler> Drop for Lease<'_, C> {
    fn drop(&mut self) {
        if let Some(s) = self.session.take() {
            let mut st = self.pool.state.lock().expect("pool lock");
            st.idle.entry(std::mem::take(&mut self.header)).or_default().push(s);
            drop(st);
            self.pool.freed.notify_one();
        }
    }
}
