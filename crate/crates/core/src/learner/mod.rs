//! The preference-based reward model and its training.

pub mod autodiff;
pub mod encoding;
pub mod network;
pub mod optim;
pub mod preference;
pub mod train;

pub use encoding::TokenEncoder;
pub use network::{attention_layer, AttentionLayer, RewardModel, RewardTransform};
pub use preference::{
    build_preference_set, full_pair_count, loss_diff, loss_preference, loss_reward_fit, loss_total, preference_probability,
    sample_unranked_pairs, PreferenceSet, TIE_TOL,
};
pub use train::{instance_loss_grad, train, train_from, InstanceTarget, LossMode, SamplingMode, TrainConfig, TrainReport, TrainingSet};
