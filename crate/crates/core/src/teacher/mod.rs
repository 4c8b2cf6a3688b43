//! Teacher client: prompt templating, backends, caching and bounded-concurrency
//! batch generation.

mod backend;
mod cache;
mod stub;
mod template;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

pub use backend::{
    generate, BackendDescriptor, BackendError, BackendKind, CompletionRequest, CompletionResponse, GenerationParams,
    GenerationResult, HttpBackend, LocalProcessBackend, RetryPolicy, TeacherError, TextGenerator,
};
pub use cache::{cached_generate, prompt_key, CacheEntry, GenerationCache};
pub use stub::StubTeacher;
pub use template::{question_bindings, render_prompt, PromptRole, PromptTemplate, TemplateError, TemplateSet, PLACEHOLDERS};

pub const DEFAULT_CONCURRENCY: usize = 4;

/// Applies `f` to every item with at most `limit` calls running at once.
/// Results come back in input order.
pub fn parallel_map<T, R, F>(items: &[T], limit: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync,
{
    let workers = limit.max(1).min(items.len());
    if workers <= 1 {
        return items.iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<R>> = std::iter::repeat_with(|| None).take(items.len()).collect();
    let collected: Vec<Vec<(usize, R)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= items.len() {
                            break done;
                        }
                        done.push((i, f(i, &items[i])));
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    for (i, r) in collected.into_iter().flatten() {
        slots[i] = Some(r);
    }
    slots.into_iter().map(|r| r.expect("every index processed")).collect()
}

/// A teacher with one default backend and optional per-role overrides.
#[derive(Clone)]
pub struct TeacherClient {
    default: Arc<dyn TextGenerator>,
    overrides: BTreeMap<PromptRole, Arc<dyn TextGenerator>>,
    cache: Option<GenerationCache>,
    pub retry: RetryPolicy,
    pub concurrency: usize,
}

impl TeacherClient {
    pub fn new(default: Arc<dyn TextGenerator>) -> Self {
        Self {
            default,
            overrides: BTreeMap::new(),
            cache: None,
            retry: RetryPolicy::default(),
            concurrency: DEFAULT_CONCURRENCY,
        }
    }

    pub fn with_cache(mut self, cache: GenerationCache) -> Self {
        self.cache = Some(cache);
        self
    }

    pub fn with_override(mut self, role: PromptRole, backend: Arc<dyn TextGenerator>) -> Self {
        self.overrides.insert(role, backend);
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn with_concurrency(mut self, limit: usize) -> Self {
        self.concurrency = limit.max(1);
        self
    }

    pub fn cache(&self) -> Option<&GenerationCache> {
        self.cache.as_ref()
    }

    pub fn backend_for(&self, role: PromptRole) -> &dyn TextGenerator {
        self.overrides.get(&role).unwrap_or(&self.default).as_ref()
    }

    pub fn model_id(&self, role: PromptRole) -> &str {
        self.backend_for(role).model_id()
    }

    /// Generates for one role, going through the cache when one is attached.
    pub fn generate(&self, role: PromptRole, prompt: &str, params: &GenerationParams) -> Result<GenerationResult, TeacherError> {
        let backend = self.backend_for(role);
        match &self.cache {
            Some(cache) => cached_generate(cache, backend, prompt, params, &self.retry),
            None => generate(backend, prompt, params, &self.retry),
        }
    }

    /// Generates every prompt under the in-flight limit, in input order.
    pub fn generate_batch(
        &self,
        role: PromptRole,
        prompts: &[String],
        params: &GenerationParams,
    ) -> Vec<Result<GenerationResult, TeacherError>> {
        parallel_map(prompts, self.concurrency, |_, p| self.generate(role, p, params))
    }
}
