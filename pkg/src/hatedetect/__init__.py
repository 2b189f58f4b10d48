"""Hate speech detection with author history and a learned walk over
similar posts."""

from .agent import (EpisodeTrace, PolicyParams, compute_reward,
                    epsilon_schedule, init_policy, policy_forward,
                    policy_forward_np, reinforce_update, select_action)
from .autograd import Node, NumericalFault, backward
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .layers import EmptySequence, LinearParams, LstmParams, bilstm_encode
from .lsh import (EmptyShingles, InsufficientPool, LshConfig, LshIndex,
                  NeighborSet, brute_force_topk, build_index, jaccard, query,
                  shingles)
from .metrics import (McNemarResult, McNemarUndefined, MetricsReport, mcnemar,
                      prf1, relative_improvement)
from .model import ModelParams, init_model
from .optim import Adam, clip_grad_norm
from .synth import SynthConfig, gen_cluster_pool, gen_synthetic, split_dataset
from .textio import (Dataset, HistorySet, Post, Vocab, build_vocab,
                     load_embeddings, random_embeddings, read_dataset,
                     read_histories, read_posts, tokenize, write_posts)
from .trainer import (TrainConfig, TrainResult, evaluate, load_model, predict,
                      prepare_for_mode, pretrain, save_model, train)

__version__ = "0.1.0"
