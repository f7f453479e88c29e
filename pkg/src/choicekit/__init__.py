"""Discrete-choice modeling and assortment optimization toolkit."""

from .core import (Assortment, CapacityConstraint, ChoiceDataset, ChoiceModel,
                   DatasetError, ModelInvariantError, RevenueSpec, Universe,
                   ce_loss, expected_revenue, read_product_features_csv,
                   read_transactions_csv, sample_choice, validate_dataset,
                   validate_prob_vector, write_product_features_csv,
                   write_transactions_csv)
from .estimators import EmConfig, MleConfig, fit_feature_mnl_mle, fit_mccm_em, fit_mnl_mle
from .evaluation import (ExperimentSpec, ReportTable, UniformModel,
                         ace_calibration, assortment_effect_delta,
                         depth_width_sweep, distribution_shift_experiment,
                         em_assortment_size_experiment, gen_capacity,
                         gen_revenue, meta_learn, run_opt_experiment,
                         run_prediction_experiment, warm_start_experiment)
from .mip import (MipInstance, OptResult, adxopt, brute_force_opt,
                  build_mnl_milp, build_nn_mip, build_np_milp, export_lp,
                  mccm_bellman_opt, mnl_milp_opt, np_milp_opt, opt_ratio,
                  parse_lp, revenue_ordered, solve_milp, solve_nn_mip,
                  surrogate_brute_force, surrogate_ratio)
from .neural import (FeatureEncoderParams, NetworkParams, NeuralChoiceModel,
                     TrainConfig, TrainingDiverged, backward, backward_feature,
                     dataset_ce, forward_feature, forward_gasn, forward_rasn,
                     generalization_bound, init_encoder, init_params,
                     load_network, save_network, train, warm_start_augment)
from .synthetic import (AssortmentSampler, FeatureMccmModel, FeatureMnlModel,
                        FixtureTable, MccmModel, MmnlModel, MnlModel, NpModel,
                        TabularModel, augment_no_purchase, fixture_tables,
                        gen_dataset, gen_feature_instance, gen_instance,
                        load_model, masked_softmax, mccm_prob, mmnl_prob,
                        mnl_prob, model_from_dict, model_to_dict, np_prob,
                        sample_assortments, save_model)

__version__ = "0.1.0"
