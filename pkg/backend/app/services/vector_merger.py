"""
CohortForge - VectorMerger
"""
from typing import Dict, List, Tuple

from app.core.exceptions import PatientMismatch, SchemaMismatch
from app.models.schemas import (
    Conflict, FeatureValue, MergePolicy, MergePrecedence, PatientVector, Provenance
)


_SOURCES = {
    Provenance.STRUCTURED: frozenset({Provenance.STRUCTURED}),
    Provenance.REPORT: frozenset({Provenance.REPORT}),
    Provenance.BOTH: frozenset({Provenance.STRUCTURED, Provenance.REPORT}),
}


def combine_provenance(a: Provenance, b: Provenance) -> Provenance:
    """Union of the sources behind two agreeing values"""
    sources = _SOURCES[a] | _SOURCES[b]
    return Provenance.BOTH if len(sources) == 2 else next(iter(sources))


def values_conflict(a: FeatureValue, b: FeatureValue, tolerance: float) -> bool:
    """Two known values disagree (relative tolerance for numbers)"""
    if a.state != b.state:
        return True
    if isinstance(a.value, float) and isinstance(b.value, float):
        reference = max(abs(a.value), abs(b.value))
        if reference == 0.0:
            return False
        return abs(a.value - b.value) / reference > tolerance
    return a.value != b.value


def merge(
    structured_vec: PatientVector,
    report_vec: PatientVector,
    policy: MergePolicy = MergePolicy()
) -> Tuple[PatientVector, List[Conflict]]:
    """
    Merge the structured and report vectors of one patient

    Args:
        structured_vec: Output of structured2vector
        report_vec: Output of report2vector
        policy: Precedence and numeric tolerance

    Returns:
        (merged vector, conflicts); the merged vector keeps structured_vec's label
    """
    if structured_vec.patient_id != report_vec.patient_id:
        raise PatientMismatch(
            f"cannot merge {structured_vec.patient_id} with {report_vec.patient_id}",
            patient_id=structured_vec.patient_id
        )
    if set(structured_vec.values) != set(report_vec.values):
        differing = sorted(set(structured_vec.values) ^ set(report_vec.values))
        raise SchemaMismatch(
            f"vectors disagree on feature set (e.g. '{differing[0]}')",
            patient_id=structured_vec.patient_id
        )

    structured_first = policy.precedence == MergePrecedence.STRUCTURED_FIRST
    merged: Dict[str, FeatureValue] = {}
    conflicts: List[Conflict] = []
    for feature_id, s_val in structured_vec.values.items():
        r_val = report_vec.values[feature_id]
        if not s_val.known and not r_val.known:
            merged[feature_id] = FeatureValue.unknown()
        elif s_val.known != r_val.known:
            merged[feature_id] = s_val if s_val.known else r_val
        else:
            chosen = s_val if structured_first else r_val
            if values_conflict(s_val, r_val, policy.numeric_conflict_tolerance):
                merged[feature_id] = chosen
                conflicts.append(Conflict(
                    patient_id=structured_vec.patient_id,
                    feature_id=feature_id,
                    structured_value=s_val.value if s_val.value is not None else s_val.state.value,
                    report_value=r_val.value if r_val.value is not None else r_val.state.value,
                    resolution=chosen.provenance,
                ))
            else:
                merged[feature_id] = chosen.with_provenance(
                    combine_provenance(s_val.provenance, r_val.provenance)
                )

    vector = structured_vec.model_copy(update={
        "values": merged,
        "index_date": structured_vec.index_date or report_vec.index_date,
        "label": structured_vec.label if structured_vec.label is not None else report_vec.label,
    })
    return vector, conflicts
