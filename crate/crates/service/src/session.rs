//! One live session: its on-disk store and the ingest/edit pipeline.
//!
//! Layout of a session directory:
//!
//! ```text
//! session.json    header (goals, model, status)
//! timeline.jsonl  one SegmentAnalysis per ingested segment, as analysed
//! edits.jsonl     concept edits
//! notes.jsonl     suggestions created after ingest, acknowledgements
//! summary.json    rolling meeting summary
//! events.jsonl    pushed events
//! ```
//!
//! Everything a response reports is on disk before the response is built.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use cofac_core::advisor::{speech_text, suggest, Advice, FewShotExample};
use cofac_core::backend::{text_hash, LanguageBackend};
use cofac_core::classifier::CbmModel;
use cofac_core::clock::Clock;
use cofac_core::dataset::Segment;
use cofac_core::editing::EditJournal;
use cofac_core::extractor::{extract_concepts, vector_to_json};
use cofac_core::schema::ConceptSchema;
use cofac_core::summary::update_summary;
use cofac_core::{jsonl, EditRequest, MeetingSummary, SegmentRef, Suggestion};

use crate::error::ServiceError;
use crate::events::EventHub;
use crate::model::{
    AckState, Channel, EditBody, EditResponse, EventBody, IngestSegment, Notification, SegmentAnalysis, SegmentNote,
    SessionMeta, SessionStatus, SessionView,
};
use crate::speech::SpeechHook;

/// Allowed slack on segment boundaries, in seconds.
pub const BOUNDARY_TOLERANCE_S: f64 = 1.0;
pub const SEGMENT_LENGTH_S: f64 = 60.0;

/// Shared, session-independent pipeline parts.
pub struct Pipeline {
    pub schema: ConceptSchema,
    pub backend: Arc<dyn LanguageBackend>,
    pub fewshot: Vec<FewShotExample>,
    pub clock: Arc<dyn Clock>,
    pub speech: Option<SpeechHook>,
    pub summary_budget: usize,
}

impl Pipeline {
    fn notify(&self, suggestion: &Suggestion) -> Notification {
        let speech_payload = speech_text(suggestion);
        let mut delivered_via = std::collections::BTreeSet::from([Channel::Text]);
        if self.speech.as_ref().is_some_and(|h| h.deliver(&speech_payload)) {
            delivered_via.insert(Channel::Speech);
        }
        Notification {
            suggestion_ref: suggestion.segment_ref.clone(),
            text_payload: format!("[{}] {}", suggestion.category, suggestion.action),
            speech_payload,
            delivered_via,
        }
    }
}

pub struct Session {
    meta: SessionMeta,
    dir: PathBuf,
    timeline: Vec<SegmentAnalysis>,
    summary: MeetingSummary,
    journal: EditJournal,
    hub: Arc<EventHub>,
}

fn meta_path(dir: &Path) -> PathBuf {
    dir.join("session.json")
}

impl Session {
    pub fn create(dir: PathBuf, meta: SessionMeta, schema: &ConceptSchema) -> Result<Self, ServiceError> {
        std::fs::create_dir_all(&dir)?;
        jsonl::write_json_atomic(&meta_path(&dir), &meta)?;
        let summary = MeetingSummary::new(&meta.session_id);
        jsonl::write_json_atomic(&dir.join("summary.json"), &summary)?;
        let journal = EditJournal::open(dir.join("edits.jsonl"), schema.clone(), [])?;
        let hub = Arc::new(EventHub::open(dir.join("events.jsonl"), &meta.session_id)?);
        Ok(Self {
            meta,
            dir,
            timeline: Vec::new(),
            summary,
            journal,
            hub,
        })
    }

    /// Rebuilds a session from its directory.
    pub fn open(dir: PathBuf, schema: &ConceptSchema) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(meta_path(&dir))?;
        let meta: SessionMeta =
            serde_json::from_str(&text).map_err(|e| ServiceError::Internal(format!("{}: {e}", dir.display())))?;

        let timeline_path = dir.join("timeline.jsonl");
        jsonl::truncate_torn_tail(&timeline_path)?;
        let mut timeline: Vec<SegmentAnalysis> = jsonl::read_all(&timeline_path)?;
        for (i, a) in timeline.iter().enumerate() {
            if a.index != i {
                return Err(ServiceError::Internal(format!(
                    "{}: timeline entry {i} has index {}",
                    dir.display(),
                    a.index
                )));
            }
        }

        let originals = timeline.iter().map(|a| (seg_ref(&meta.session_id, a.index), a.extraction.vector.clone()));
        let journal = EditJournal::open(dir.join("edits.jsonl"), schema.clone(), originals)?;
        for a in timeline.iter_mut() {
            let r = seg_ref(&meta.session_id, a.index);
            let history = journal.edit_history(&r)?;
            if let Some(last) = history.last() {
                a.current_probability = last.prob_after;
                a.current_decision = last.decision_after;
            }
            a.edits = history.to_vec();
            a.current_vector = journal.working(&r).cloned().unwrap_or_else(|| a.current_vector.clone());
        }

        let notes_path = dir.join("notes.jsonl");
        jsonl::truncate_torn_tail(&notes_path)?;
        for note in jsonl::read_all::<SegmentNote>(&notes_path)? {
            match note {
                SegmentNote::Suggestion {
                    index,
                    suggestion,
                    notification,
                    warnings,
                } => {
                    if let Some(a) = timeline.get_mut(index) {
                        a.suggestion = Some(*suggestion);
                        a.notification = Some(notification);
                        a.advice_warnings = warnings;
                    }
                }
                SegmentNote::Ack { index, state, .. } => {
                    if let Some(a) = timeline.get_mut(index) {
                        a.ack = Some(state);
                    }
                }
            }
        }

        let mut summary: MeetingSummary = match std::fs::read_to_string(dir.join("summary.json")) {
            Ok(t) => serde_json::from_str(&t).map_err(|e| ServiceError::Internal(e.to_string()))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => MeetingSummary::new(&meta.session_id),
            Err(e) => return Err(e.into()),
        };
        // a crash between the timeline append and the summary write leaves the summary behind
        let expected = timeline.len().checked_sub(1);
        if summary.as_of_segment != expected {
            if let Some(last) = expected {
                summary.stale_since.get_or_insert(summary.next_segment());
                summary.as_of_segment = Some(last);
            }
        }

        let hub = Arc::new(EventHub::open(dir.join("events.jsonl"), &meta.session_id)?);
        Ok(Self {
            meta,
            dir,
            timeline,
            summary,
            journal,
            hub,
        })
    }

    pub fn id(&self) -> &str {
        &self.meta.session_id
    }

    pub fn meta(&self) -> &SessionMeta {
        &self.meta
    }

    pub fn timeline(&self) -> &[SegmentAnalysis] {
        &self.timeline
    }

    pub fn summary(&self) -> &MeetingSummary {
        &self.summary
    }

    pub fn hub(&self) -> Arc<EventHub> {
        Arc::clone(&self.hub)
    }

    pub fn view(&self) -> SessionView {
        SessionView {
            meta: self.meta.clone(),
            segments: self.timeline.len(),
            last_seq: self.hub.last_seq(),
        }
    }

    fn check_active(&self) -> Result<(), ServiceError> {
        match self.meta.status {
            SessionStatus::Active => Ok(()),
            SessionStatus::Closed => Err(ServiceError::SessionClosed),
        }
    }

    fn check_window(&self, body: &IngestSegment) -> Result<(), ServiceError> {
        if !(body.t0.is_finite() && body.t1.is_finite()) || body.t0 < 0.0 {
            return Err(ServiceError::InvalidSegment("bounds must be finite and non-negative".into()));
        }
        let len = body.t1 - body.t0;
        if (len - SEGMENT_LENGTH_S).abs() > BOUNDARY_TOLERANCE_S {
            return Err(ServiceError::InvalidSegment(format!(
                "segment spans {len}s, expected {SEGMENT_LENGTH_S}s"
            )));
        }
        if let Some(last) = self.timeline.last() {
            let expected = last.segment.t1_s;
            if (body.t0 - expected).abs() > BOUNDARY_TOLERANCE_S {
                return Err(ServiceError::OutOfOrder {
                    expected,
                    got: body.t0,
                });
            }
        }
        Ok(())
    }

    /// Extract, predict, summarize, advise; persist; publish.
    ///
    /// On extraction failure nothing is stored. On advisor failure the
    /// analysis is stored with a degraded flag and returned inside the error.
    pub fn ingest(
        &mut self,
        model: &CbmModel,
        pipeline: &Pipeline,
        body: IngestSegment,
    ) -> Result<SegmentAnalysis, ServiceError> {
        self.check_active()?;
        self.check_window(&body)?;
        let index = self.timeline.len();
        let segment = Segment {
            session_id: self.meta.session_id.clone(),
            t0_s: body.t0,
            t1_s: body.t1,
            utterances: body.utterances,
        };
        let schema = &pipeline.schema;

        let extraction = extract_concepts(&segment, schema, pipeline.backend.as_ref())
            .map_err(|e| ServiceError::BackendUnavailable(e.to_string()))?;
        let probability = model
            .predict_proba(&extraction.vector)
            .map_err(|e| ServiceError::Internal(e.to_string()))?;
        let decision = model.decide_proba(probability);
        tracing::info!(
            session = %self.meta.session_id,
            index,
            transcript_sha256 = %text_hash(&segment.text()),
            concepts = %vector_to_json(schema, &extraction.vector),
            probability,
            decision,
            "segment analysed"
        );

        let summary = update_summary(
            &self.summary,
            index,
            &segment,
            &extraction.vector,
            schema,
            pipeline.backend.as_ref(),
            pipeline.summary_budget,
        );

        let mut degraded = Vec::new();
        let mut advice_failure = None;
        let mut advice: Option<Advice> = None;
        if decision == 1 {
            match suggest(
                &summary,
                &self.meta.stage_goals,
                &segment,
                seg_ref(&self.meta.session_id, index),
                &extraction.vector,
                schema,
                &pipeline.fewshot,
                pipeline.backend.as_ref(),
                pipeline.clock.now(),
            ) {
                Ok(a) => advice = Some(a),
                Err(e) => {
                    tracing::warn!(session = %self.meta.session_id, index, error = %e, "advisor failed");
                    degraded.push("advisor_unavailable".to_string());
                    advice_failure = Some(e.to_string());
                }
            }
        }
        let notification = advice.as_ref().map(|a| pipeline.notify(&a.suggestion));
        let analysis = SegmentAnalysis {
            index,
            current_vector: extraction.vector.clone(),
            current_probability: probability,
            current_decision: decision,
            segment,
            extraction,
            probability,
            decision,
            advice_warnings: advice.as_ref().map(|a| a.warnings.clone()).unwrap_or_default(),
            suggestion: advice.map(|a| a.suggestion),
            notification,
            degraded,
            edits: Vec::new(),
            ack: None,
            analyzed_at: pipeline.clock.now(),
        };

        jsonl::append(&self.dir.join("timeline.jsonl"), &analysis)?;
        jsonl::write_json_atomic(&self.dir.join("summary.json"), &summary)?;
        self.journal.register(
            seg_ref(&self.meta.session_id, index),
            analysis.extraction.vector.clone(),
        );
        self.timeline.push(analysis.clone());
        self.summary = summary.clone();

        let mut events = vec![EventBody::SegmentAnalyzed(Box::new(analysis.clone()))];
        if let (Some(s), Some(n)) = (&analysis.suggestion, &analysis.notification) {
            events.push(EventBody::SuggestionCreated {
                segment_index: index,
                suggestion: s.clone(),
                notification: n.clone(),
            });
        }
        events.push(EventBody::SummaryUpdated(summary));
        self.hub.publish(analysis.analyzed_at, events)?;

        match advice_failure {
            Some(reason) => Err(ServiceError::AdvisorUnavailable {
                reason,
                analysis: Box::new(analysis),
            }),
            None => Ok(analysis),
        }
    }

    /// Applies a concept edit; optionally asks for advice if the decision turned on.
    pub fn edit(
        &mut self,
        model: &CbmModel,
        pipeline: &Pipeline,
        index: usize,
        body: EditBody,
    ) -> Result<EditResponse, ServiceError> {
        self.check_active()?;
        if index >= self.timeline.len() {
            return Err(ServiceError::UnknownSegment(index));
        }
        let r = seg_ref(&self.meta.session_id, index);
        let request = EditRequest {
            concept: body.concept,
            old_value: body.old_value,
            new_value: body.new_value,
            editor: body.editor.unwrap_or_else(|| "facilitator".into()),
        };
        let now = pipeline.clock.now();
        let outcome = self.journal.apply(model, &r, &request, now)?;
        tracing::info!(
            session = %self.meta.session_id,
            index,
            concept = %outcome.edit.concept,
            old = outcome.edit.old_value,
            new = outcome.edit.new_value,
            flipped = outcome.flipped,
            "concept edited"
        );
        let working = self.journal.working(&r).cloned().expect("registered segment");
        {
            let a = &mut self.timeline[index];
            a.edits.push(outcome.clone());
            a.current_vector = working;
            a.current_probability = outcome.prob_after;
            a.current_decision = outcome.decision_after;
        }
        let mut events = vec![EventBody::EditApplied {
            segment_index: index,
            outcome: outcome.clone(),
            analysis: Box::new(self.timeline[index].clone()),
        }];

        let mut new_suggestion = None;
        let wants_advice = body.request_advice && outcome.decision_after == 1 && self.timeline[index].suggestion.is_none();
        if wants_advice {
            let a = &self.timeline[index];
            let advice = suggest(
                &self.summary,
                &self.meta.stage_goals,
                &a.segment,
                r.clone(),
                &a.current_vector,
                &pipeline.schema,
                &pipeline.fewshot,
                pipeline.backend.as_ref(),
                pipeline.clock.now(),
            );
            match advice {
                Ok(advice) => {
                    let notification = pipeline.notify(&advice.suggestion);
                    jsonl::append(
                        &self.dir.join("notes.jsonl"),
                        &SegmentNote::Suggestion {
                            index,
                            suggestion: Box::new(advice.suggestion.clone()),
                            notification: notification.clone(),
                            warnings: advice.warnings.clone(),
                        },
                    )?;
                    let a = &mut self.timeline[index];
                    a.suggestion = Some(advice.suggestion.clone());
                    a.notification = Some(notification.clone());
                    a.advice_warnings = advice.warnings;
                    events.push(EventBody::SuggestionCreated {
                        segment_index: index,
                        suggestion: advice.suggestion.clone(),
                        notification,
                    });
                    new_suggestion = Some(advice.suggestion);
                }
                // the edit itself is stored; the missing advice is not fatal here
                Err(e) => tracing::warn!(session = %self.meta.session_id, index, error = %e, "advisor failed after edit"),
            }
        }
        self.hub.publish(now, events)?;
        Ok(EditResponse {
            outcome,
            suggestion: new_suggestion,
        })
    }

    pub fn acknowledge(
        &mut self,
        pipeline: &Pipeline,
        index: usize,
        state: AckState,
    ) -> Result<SegmentAnalysis, ServiceError> {
        self.check_active()?;
        let a = self.timeline.get(index).ok_or(ServiceError::UnknownSegment(index))?;
        if a.suggestion.is_none() {
            return Err(ServiceError::NoSuggestion(index));
        }
        let at = pipeline.clock.now();
        jsonl::append(&self.dir.join("notes.jsonl"), &SegmentNote::Ack { index, state, at })?;
        self.timeline[index].ack = Some(state);
        self.hub.publish(
            at,
            vec![EventBody::SuggestionAcknowledged {
                segment_index: index,
                state,
            }],
        )?;
        Ok(self.timeline[index].clone())
    }

    /// Closes the session. Closing twice is a no-op.
    pub fn close(&mut self, pipeline: &Pipeline) -> Result<SessionView, ServiceError> {
        if self.meta.status == SessionStatus::Closed {
            return Ok(self.view());
        }
        let at = pipeline.clock.now();
        let mut meta = self.meta.clone();
        meta.status = SessionStatus::Closed;
        meta.closed_at = Some(at);
        jsonl::write_json_atomic(&meta_path(&self.dir), &meta)?;
        self.meta = meta;
        self.hub.publish(at, vec![EventBody::SessionClosed])?;
        tracing::info!(session = %self.meta.session_id, "session closed");
        Ok(self.view())
    }
}

fn seg_ref(session_id: &str, index: usize) -> SegmentRef {
    SegmentRef {
        session_id: session_id.to_string(),
        index,
    }
}
