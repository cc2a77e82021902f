//! Thread-pool helpers. Every candidate owns its random stream, so results
//! do not depend on the number of threads.

use invsynth_core::generate::{generate_candidate, Candidate, GenerationConfig};
use invsynth_core::model::ConditionalModel;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Same pool as [`invsynth_core::generate::generate_pool`], built in parallel.
pub fn par_generate_pool<M: ConditionalModel + Sync + ?Sized>(
    model: &M,
    config: &GenerationConfig,
) -> invsynth_core::Result<Vec<Candidate>> {
    let conditioning = config.resolve(model.schema())?;
    (0..config.candidates).into_par_iter().map(|id| generate_candidate(model, config, &conditioning, id)).collect()
}

/// Run `f` on a pool of `threads` workers, or on the global pool for `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::Usage("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Usage(format!("cannot start {n} threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}
