use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{adam_step, losses, mse_gradient, AdamConfig, AdamState, Autoencoder, NnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Epochs without a strictly lower validation MAE before training halts.
    pub patience_epochs: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-4, batch_size: 256, patience_epochs: 3, max_epochs: 500, seed: 0 }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.patience_epochs == 0 || self.max_epochs == 0 {
            return Err(NnError::InvalidDims("batch size, patience and max epochs must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(NnError::InvalidDims(format!("learning rate {}", self.learning_rate)));
        }
        Ok(())
    }
}

/// Per-epoch record of a training run. Epochs are numbered from 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub train_mse: Vec<f64>,
    pub val_mae: Vec<f64>,
    /// Validation MAE of the untrained model, when a validation set was given.
    pub initial_val_mae: Option<f64>,
    /// Epoch whose parameters were returned.
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainHistory {
    pub fn epochs_run(&self) -> usize {
        self.val_mae.len()
    }

    pub fn best_val_mae(&self) -> Option<f64> {
        self.best_epoch.checked_sub(1).map(|i| self.val_mae[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopState {
    Improved,
    Waiting,
    Stop,
}

/// Patience counter over a validation metric where lower is better.
#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        Self { patience, best: f64::INFINITY, best_epoch: 0, stale: 0 }
    }

    pub fn observe(&mut self, epoch: usize, metric: f64) -> StopState {
        if metric < self.best {
            self.best = metric;
            self.best_epoch = epoch;
            self.stale = 0;
            StopState::Improved
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                StopState::Stop
            } else {
                StopState::Waiting
            }
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best(&self) -> f64 {
        self.best
    }
}

/// Mean absolute reconstruction error over `data`, evaluated in chunks.
pub(crate) fn reconstruction_mae(model: &Autoencoder<f32>, data: ArrayView2<'_, f32>, chunk: usize) -> Result<f64> {
    let mut total = 0.0;
    for rows in data.axis_chunks_iter(Axis(0), chunk.max(1)) {
        let (recon, _) = model.forward(rows)?;
        total += losses(rows, recon.view()).1 * rows.len() as f64;
    }
    Ok(total / data.len().max(1) as f64)
}

/// Minimize reconstruction MSE with Adam; stop on validation MAE and return the best snapshot.
pub fn train(
    model: Autoencoder<f32>,
    train_data: ArrayView2<'_, f32>,
    val_data: ArrayView2<'_, f32>,
    config: &TrainConfig,
) -> Result<(Autoencoder<f32>, TrainHistory)> {
    if val_data.nrows() == 0 {
        return Err(NnError::EmptyData);
    }
    if val_data.ncols() != model.input_dim() {
        return Err(NnError::DimensionMismatch { expected: model.input_dim(), got: val_data.ncols() });
    }
    let initial = reconstruction_mae(&model, val_data, config.batch_size)?;
    let mut eval_error = None;
    let (model, mut history) = train_with_evaluator(model, train_data, config, |m, _| {
        reconstruction_mae(m, val_data, config.batch_size).unwrap_or_else(|e| {
            eval_error.get_or_insert(e);
            f64::NAN
        })
    })?;
    if let Some(e) = eval_error {
        return Err(e);
    }
    history.initial_val_mae = Some(initial);
    Ok((model, history))
}

/// Training loop with the validation metric supplied by `evaluator(model, epoch)`.
///
/// One epoch is a full pass over a freshly shuffled order of `train_data` in batches of
/// `batch_size` (the last batch may be short).
pub fn train_with_evaluator<F>(
    mut model: Autoencoder<f32>,
    train_data: ArrayView2<'_, f32>,
    config: &TrainConfig,
    mut evaluator: F,
) -> Result<(Autoencoder<f32>, TrainHistory)>
where
    F: FnMut(&Autoencoder<f32>, usize) -> f64,
{
    config.validate()?;
    if train_data.nrows() == 0 {
        return Err(NnError::EmptyData);
    }
    if train_data.ncols() != model.input_dim() {
        return Err(NnError::DimensionMismatch { expected: model.input_dim(), got: train_data.ncols() });
    }
    let adam = AdamConfig { learning_rate: config.learning_rate, ..AdamConfig::default() };
    let mut state = AdamState::for_params(&model.parameter_slices(), adam);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_data.nrows()).collect();
    let mut stopper = EarlyStopping::new(config.patience_epochs);
    let mut history = TrainHistory::default();
    let mut best = None;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut sum_mse = 0.0;
        for batch_rows in order.chunks(config.batch_size) {
            let batch = train_data.select(Axis(0), batch_rows);
            let (recon, cache) = model.forward(batch.view())?;
            sum_mse += losses(batch.view(), recon.view()).0 * batch_rows.len() as f64;
            let grads = model.backward(&cache, mse_gradient(batch.view(), recon.view()).view())?;
            adam_step(&mut model.parameter_slices_mut(), &grads.slices(), &mut state)?;
        }
        history.train_mse.push(sum_mse / order.len() as f64);
        let mae = evaluator(&model, epoch);
        history.val_mae.push(mae);
        match stopper.observe(epoch, mae) {
            StopState::Improved => best = Some(model.clone()),
            StopState::Waiting => {}
            StopState::Stop => {
                history.stopped_early = true;
                break;
            }
        }
    }
    history.best_epoch = stopper.best_epoch();
    Ok((best.unwrap_or(model), history))
}
