//! Mini-batch SGD with validation-loss early stopping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::arch::Arch;
use crate::error::{Error, Result};
use crate::model::{mean_bce, scale_input, Model, DROPOUT_RATE};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f32,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub dropout_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            batch_size: 64,
            max_epochs: 50,
            patience: 3,
            seed: 0,
            dropout_rate: DROPOUT_RATE,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("learning rate must be > 0".into()));
        }
        if self.patience == 0 {
            return Err(Error::InvalidConfig("patience must be >= 1".into()));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::InvalidConfig(
                "batch size and epoch limit must be >= 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidConfig(
                "dropout rate must be in [0, 1)".into(),
            ));
        }
        Ok(())
    }
}

/// Stops once the monitored loss has not improved on its best value for
/// `patience` consecutive epochs.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: Option<(usize, f64)>,
    stale: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            stale: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> Verdict {
        // NaN never counts as an improvement
        let better = match self.best {
            None => !loss.is_nan(),
            Some((_, b)) => loss < b,
        };
        if better {
            self.best = Some((epoch, loss));
            self.stale = 0;
            Verdict::Improved
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                Verdict::Stop
            } else {
                Verdict::Continue
            }
        }
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best.map(|(e, _)| e)
    }
}

/// Something trained epoch by epoch and judged on a validation loss.
pub trait Learner {
    type Snapshot;

    /// Runs one epoch and returns its mean training loss.
    fn train_epoch(&mut self, epoch: usize) -> Result<f64>;
    fn val_loss(&mut self) -> Result<f64>;
    fn snapshot(&self) -> Self::Snapshot;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone)]
pub struct FitOutcome<S> {
    pub best: S,
    pub best_epoch: usize,
    pub history: Vec<EpochStats>,
    pub stopped_early: bool,
}

/// Epochs are numbered from 1.
pub fn fit<L: Learner>(
    learner: &mut L,
    max_epochs: usize,
    patience: usize,
) -> Result<FitOutcome<L::Snapshot>> {
    let mut stopper = EarlyStopping::new(patience);
    let mut history = Vec::new();
    let mut best = None;
    let mut stopped_early = false;
    for epoch in 1..=max_epochs {
        let train_loss = learner.train_epoch(epoch)?;
        let val_loss = learner.val_loss()?;
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
        });
        log::info!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6}");
        match stopper.observe(epoch, val_loss) {
            Verdict::Improved => best = Some(learner.snapshot()),
            Verdict::Continue => {}
            Verdict::Stop => {
                stopped_early = epoch < max_epochs;
                break;
            }
        }
    }
    let best_epoch = stopper.best_epoch();
    match (best, best_epoch) {
        (Some(best), Some(best_epoch)) => Ok(FitOutcome {
            best,
            best_epoch,
            history,
            stopped_early,
        }),
        _ => Err(Error::InvalidConfig(
            "validation loss was never finite".into(),
        )),
    }
}

/// Images stored as scaled reals, HWC, one after another.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub size: usize,
    pub images: Vec<f32>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn new(size: usize) -> Self {
        Dataset {
            size,
            ..Default::default()
        }
    }

    fn image_len(&self) -> usize {
        self.size * self.size * 3
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Adds an interleaved HWC byte image.
    pub fn push_bytes(&mut self, hwc: &[u8], label: u8) -> Result<()> {
        if hwc.len() != self.image_len() {
            return Err(Error::ShapeMismatch(format!(
                "image of {} bytes, expected {}",
                hwc.len(),
                self.image_len()
            )));
        }
        self.images.extend(scale_input::<f32>(hwc));
        self.labels.push(label);
        Ok(())
    }

    pub fn image(&self, i: usize) -> &[f32] {
        let n = self.image_len();
        &self.images[i * n..(i + 1) * n]
    }

    fn gather(&self, idx: &[usize], buf: &mut Vec<f32>, labels: &mut Vec<u8>) {
        buf.clear();
        labels.clear();
        for &i in idx {
            buf.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
    }
}

/// Eval-mode probabilities over a whole dataset, in chunks.
pub fn predict_dataset(model: &Model<f32>, data: &Dataset, chunk: usize) -> Result<Vec<f32>> {
    let n = data.image_len();
    let mut out = Vec::with_capacity(data.len());
    for xs in data.images.chunks(chunk.max(1) * n) {
        out.extend(model.predict_proba(xs)?);
    }
    Ok(out)
}

pub fn dataset_loss(model: &Model<f32>, data: &Dataset, chunk: usize) -> Result<f64> {
    let probs: Vec<f64> = predict_dataset(model, data, chunk)?
        .iter()
        .map(|&p| p as f64)
        .collect();
    Ok(mean_bce(&probs, &data.labels))
}

pub struct SgdLearner<'a> {
    pub model: Model<f32>,
    train: &'a Dataset,
    val: &'a Dataset,
    cfg: TrainConfig,
    rng: ChaCha8Rng,
    order: Vec<usize>,
}

impl<'a> SgdLearner<'a> {
    pub fn new(
        model: Model<f32>,
        train: &'a Dataset,
        val: &'a Dataset,
        cfg: TrainConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if train.is_empty() {
            return Err(Error::EmptyDataset("training set"));
        }
        if val.is_empty() {
            return Err(Error::EmptyDataset("validation set"));
        }
        for d in [train, val] {
            if d.size != model.arch.input {
                return Err(Error::ShapeMismatch(format!(
                    "{0}x{0} images for a {1}x{1} model",
                    d.size, model.arch.input
                )));
            }
        }
        // shuffling and dropout share one stream, separate from init
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(1);
        Ok(SgdLearner {
            model,
            train,
            val,
            cfg,
            rng,
            order: (0..train.len()).collect(),
        })
    }
}

impl Learner for SgdLearner<'_> {
    type Snapshot = Model<f32>;

    fn train_epoch(&mut self, _epoch: usize) -> Result<f64> {
        self.order.shuffle(&mut self.rng);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut total = 0.0;
        for idx in self.order.chunks(self.cfg.batch_size) {
            self.train.gather(idx, &mut xs, &mut ys);
            let (loss, g) =
                self.model
                    .loss_and_grad(&xs, &ys, Some((&mut self.rng, self.cfg.dropout_rate)))?;
            self.model.params.sgd_step(&g, self.cfg.learning_rate);
            total += loss as f64 * idx.len() as f64;
        }
        Ok(total / self.train.len() as f64)
    }

    fn val_loss(&mut self) -> Result<f64> {
        dataset_loss(&self.model, self.val, self.cfg.batch_size)
    }

    fn snapshot(&self) -> Model<f32> {
        self.model.clone()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model<f32>,
    pub best_epoch: usize,
    pub history: Vec<EpochStats>,
    pub stopped_early: bool,
}

/// Initializes the published architecture from `cfg.seed` and trains it.
pub fn train(
    input: usize,
    qp: u8,
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let model = Model::init(Arch::published(input)?, qp, cfg.seed);
    train_model(model, train, val, cfg)
}

pub fn train_model(
    model: Model<f32>,
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let mut learner = SgdLearner::new(model, train, val, cfg.clone())?;
    let out = fit(&mut learner, cfg.max_epochs, cfg.patience)?;
    Ok(TrainOutcome {
        model: out.best,
        best_epoch: out.best_epoch,
        history: out.history,
        stopped_early: out.stopped_early,
    })
}
