"""Toolkit for smart legal agreements: a prose document model with markup,
typed parameters bindable across documents, bidirectional cross-references,
canonical serialization with tamper-evident hashing, lifecycle and version
control, and binding to smart-contract code."""

from .canonical import (
    FORMAT_TAG,
    canonicalize,
    hash_agreement,
    hash_clause,
    hash_contract,
    hash_document,
    parse,
    serialize,
    verify,
    with_agreement_hash,
)
from .crossrefs import (
    AnchorTarget,
    CrossReference,
    IndirectTarget,
    IndirectionTables,
    Locator,
    SegmentTarget,
    TableTarget,
    add_crossref,
    edit_preserving_sources,
    navigate,
    validate_crossrefs,
)
from .diagnostics import (
    Diagnostic,
    ParseError,
    Severity,
    SlaError,
    ValidationReport,
)
from .lifecycle import (
    CodeRef,
    EditEntry,
    ImportResult,
    InstantiationRequest,
    STATUS_ORDER,
    VersionInfo,
    bind_code,
    derive_document,
    dual_integrate,
    export_transmission,
    import_merge,
    receive_transmission,
    record_edit,
    set_status,
)
from .model import (
    AgreementHeader,
    DigestValue,
    SignatureRecord,
    SmartContract,
    SmartLegalAgreement,
    validate_agreement,
    validate_contract,
)
from .params import (
    Binding,
    BindingTarget,
    Parameter,
    ParameterSet,
    PlacementPolicy,
    ResolvedEnvironment,
    TypeDef,
    TypeRef,
    collect_execution_parameters,
    identify_parameters,
    register_other_data,
    resolve_bindings,
    sync_parameters,
    typecheck_parameter,
)
from .prose import (
    Anchor,
    ChoiceBlock,
    ChoiceOption,
    Descriptive,
    DocumentId,
    ListBlock,
    ListItem,
    MarkedSpan,
    PartBoundary,
    Presentational,
    ProseDocument,
    RedactionReport,
    TableBlock,
    TableCell,
    TableRow,
    Text,
    apply_markup,
    fresh_global_id,
    list_choices,
    local_id,
    plain_text,
    redact,
    resolve_choice,
    split_parts,
    validate_structure,
)

__all__ = [
    "AgreementHeader",
    "Anchor",
    "AnchorTarget",
    "Binding",
    "BindingTarget",
    "ChoiceBlock",
    "ChoiceOption",
    "CodeRef",
    "CrossReference",
    "Descriptive",
    "Diagnostic",
    "DigestValue",
    "DocumentId",
    "EditEntry",
    "FORMAT_TAG",
    "ImportResult",
    "IndirectTarget",
    "IndirectionTables",
    "InstantiationRequest",
    "ListBlock",
    "ListItem",
    "Locator",
    "MarkedSpan",
    "Parameter",
    "ParameterSet",
    "ParseError",
    "PartBoundary",
    "PlacementPolicy",
    "Presentational",
    "ProseDocument",
    "RedactionReport",
    "ResolvedEnvironment",
    "STATUS_ORDER",
    "SegmentTarget",
    "Severity",
    "SignatureRecord",
    "SlaError",
    "SmartContract",
    "SmartLegalAgreement",
    "TableBlock",
    "TableCell",
    "TableRow",
    "TableTarget",
    "Text",
    "TypeDef",
    "TypeRef",
    "ValidationReport",
    "VersionInfo",
    "add_crossref",
    "apply_markup",
    "bind_code",
    "canonicalize",
    "collect_execution_parameters",
    "derive_document",
    "dual_integrate",
    "edit_preserving_sources",
    "export_transmission",
    "fresh_global_id",
    "hash_agreement",
    "hash_clause",
    "hash_contract",
    "hash_document",
    "identify_parameters",
    "import_merge",
    "list_choices",
    "local_id",
    "navigate",
    "parse",
    "plain_text",
    "receive_transmission",
    "record_edit",
    "redact",
    "register_other_data",
    "resolve_bindings",
    "resolve_choice",
    "serialize",
    "set_status",
    "split_parts",
    "sync_parameters",
    "typecheck_parameter",
    "validate_agreement",
    "validate_contract",
    "validate_crossrefs",
    "validate_structure",
    "verify",
    "with_agreement_hash",
]

__version__ = "0.1.0"
