"""
CohortForge - Baseline Predictor

L2-regularized logistic regression fitted by full-batch gradient descent on
mean-imputed, z-scored encodings of the patient vectors.
"""
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.special import expit, logit
from scipy.stats import chi2

from app.core.exceptions import ExcludedLabelPresent, SchemaMismatch, SingleClassTrainingSet
from app.models.results import BaselineModel, EncodedColumn
from app.models.schemas import FeatureSchema, PatientVector, TriState, ValueKind

PROBABILITY_FLOOR = 1e-12


def encode_columns(schema: FeatureSchema) -> List[EncodedColumn]:
    """Tri-state and numeric features -> one column, categorical -> one per level"""
    columns: List[EncodedColumn] = []
    for feature in schema.predictive:
        if feature.value_kind == ValueKind.CATEGORICAL:
            for level in feature.allowed_values or []:
                columns.append(EncodedColumn(name=f"{feature.id}={level}", feature_id=feature.id, level=level))
        elif feature.value_kind in (ValueKind.BOOLEAN3, ValueKind.NUMERIC):
            columns.append(EncodedColumn(name=feature.id, feature_id=feature.id))
    return columns


def encode_vector(vector: PatientVector, columns: Sequence[EncodedColumn]) -> np.ndarray:
    """Raw encoded row, NaN where the feature is Unknown"""
    row = np.full(len(columns), np.nan)
    for j, column in enumerate(columns):
        if column.feature_id not in vector.values:
            raise SchemaMismatch(f"vector lacks feature '{column.feature_id}'", patient_id=vector.patient_id)
        value = vector.values[column.feature_id]
        if not value.known:
            continue
        if column.level is not None:
            row[j] = 1.0 if value.value == column.level else 0.0
        elif value.value is None:
            row[j] = 1.0 if value.state == TriState.PRESENT else 0.0
        else:
            row[j] = float(value.value)
    return row


def encode_matrix(vectors: Sequence[PatientVector], columns: Sequence[EncodedColumn]) -> np.ndarray:
    if not vectors:
        return np.empty((0, len(columns)))
    return np.vstack([encode_vector(v, columns) for v in vectors])


def _prepare(model: BaselineModel, raw: np.ndarray) -> np.ndarray:
    means = np.asarray(model.imputation_means)
    filled = np.where(np.isnan(raw), means, raw)
    return (filled - np.asarray(model.scale_means)) / np.asarray(model.scale_stds)


def loss_and_gradient(
    weights: np.ndarray,
    bias: float,
    X: np.ndarray,
    y: np.ndarray,
    l2: float
) -> Tuple[float, np.ndarray, float]:
    """
    Mean binary cross-entropy plus (l2/2)*||w||^2

    Returns:
        (loss, gradient w.r.t. weights, gradient w.r.t. bias)
    """
    z = X @ weights + bias
    # log(1 + e^z) - y*z, stable for large |z|
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * weights @ weights)
    residual = expit(z) - y
    grad_w = X.T @ residual / len(y) + l2 * weights
    grad_b = float(np.mean(residual))
    return loss, grad_w, grad_b


def _labels(train: Sequence[PatientVector]) -> np.ndarray:
    labels = [v.label for v in train]
    if any(label is None or int(label) == -1 for label in labels):
        raise ExcludedLabelPresent("training vectors must carry labels 0/1")
    y = np.array([int(label) for label in labels], dtype=float)
    if len(np.unique(y)) < 2:
        raise SingleClassTrainingSet(f"training set of {len(y)} rows has a single class")
    return y


def deviance_p_value(weights: np.ndarray, bias: float, X: np.ndarray, y: np.ndarray) -> float:
    """
    Likelihood-ratio p-value of the fitted model against the intercept-only one

    The deviance 2 * n * (null loss - model loss) uses the unpenalized
    cross-entropy and is referred to chi2 with rank(X) degrees of freedom.
    """
    z = X @ weights + bias
    model_loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    rate = float(y.mean())
    null_loss = -(rate * np.log(rate) + (1.0 - rate) * np.log(1.0 - rate))
    dof = int(np.linalg.matrix_rank(X)) if X.size else 0
    if dof == 0:
        return 1.0
    deviance = max(0.0, 2.0 * len(y) * (null_loss - model_loss))
    return float(chi2.sf(deviance, dof))


def fit(
    train: Sequence[PatientVector],
    schema: FeatureSchema,
    l2: float = 0.01,
    epochs: int = 500,
    learning_rate: float = 0.1,
    seed: int = 42,
    significance: Optional[float] = None,
    loss_history: Optional[List[float]] = None
) -> BaselineModel:
    """
    Fit the baseline on labeled vectors

    Args:
        train: Vectors whose `label` is 0 or 1
        schema: Feature schema defining the encoding
        l2: Regularization strength (bias not penalised)
        epochs: Gradient-descent steps
        learning_rate: Fixed step size
        seed: Seeds the weight initialisation
        significance: If given, a fit whose likelihood-ratio test against the
            intercept-only model has a larger p-value is replaced by that model
        loss_history: If given, receives the training loss before every step

    Returns:
        BaselineModel holding weights and the training-split preprocessing
    """
    y = _labels(train)
    columns = encode_columns(schema)
    raw = encode_matrix(train, columns)

    with np.errstate(invalid="ignore"):
        imputation = np.nanmean(np.where(np.isnan(raw).all(axis=0), 0.0, raw), axis=0)
    filled = np.where(np.isnan(raw), imputation, raw)
    scale_means = filled.mean(axis=0)
    scale_stds = filled.std(axis=0)
    scale_stds[scale_stds == 0.0] = 1.0
    X = (filled - scale_means) / scale_stds

    rng = np.random.default_rng(seed)
    weights = rng.normal(0.0, 0.01, size=X.shape[1])
    bias = 0.0
    loss = float("nan")
    for _ in range(epochs):
        loss, grad_w, grad_b = loss_and_gradient(weights, bias, X, y, l2)
        if loss_history is not None:
            loss_history.append(loss)
        weights = weights - learning_rate * grad_w
        bias = bias - learning_rate * grad_b
    p_value = deviance_p_value(weights, bias, X, y)
    intercept_only = significance is not None and p_value > significance
    if intercept_only:
        logger.info(f"Baseline fit not significant (p={p_value:.4g}), keeping the intercept-only model")
        weights = np.zeros_like(weights)
        bias = float(logit(y.mean()))
    hyperparameters = {"l2": l2, "epochs": epochs, "learning_rate": learning_rate, "seed": seed}
    if significance is not None:
        hyperparameters["significance"] = significance
    loss, _, _ = loss_and_gradient(weights, bias, X, y, l2)

    logger.info(f"Fitted baseline on {len(y)} rows x {X.shape[1]} columns, final loss {loss:.4f}")
    return BaselineModel(
        columns=columns,
        weights=weights.tolist(),
        bias=bias,
        imputation_means=imputation.tolist(),
        scale_means=scale_means.tolist(),
        scale_stds=scale_stds.tolist(),
        hyperparameters=hyperparameters,
        final_loss=loss,
        intercept_only=intercept_only,
        deviance_p_value=p_value,
    )


def predict_proba(model: BaselineModel, vectors: Sequence[PatientVector]) -> np.ndarray:
    X = _prepare(model, encode_matrix(vectors, model.columns))
    z = X @ np.asarray(model.weights) + model.bias
    return np.clip(expit(z), PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR)


def predict(model: BaselineModel, vector: PatientVector) -> Tuple[float, int]:
    """Probability of progression and the 0.5-threshold prediction"""
    probability = float(predict_proba(model, [vector])[0])
    return probability, int(probability >= 0.5)
