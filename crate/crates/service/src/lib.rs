//! Local HTTP backend that administers blinded listening tests (MUSHRA,
//! pairwise preference, emphasis identification) and logs responses.

pub mod api;
pub mod error;
pub mod plan;
pub mod store;

pub use api::{open_service, router, serve, ResponseSubmission, ServeConfig};
pub use error::{ErrorBody, ServiceError};
pub use plan::{LoadedPlan, ScreenSpec, StimulusSpec, TestPlan};
pub use store::{Ack, Export, ExportRecords, Payload, ResponseRecord, ScreenView, SessionInfo, TestService};
