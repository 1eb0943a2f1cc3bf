//! Textual progress bar for foreground crawls.

use wikitables_core::controller::{JobPhase, JobState};

const BAR_WIDTH: usize = 30;

fn phase_label(p: JobPhase) -> &'static str {
    match p {
        JobPhase::Listing => "listing",
        JobPhase::Crawling => "crawling",
        JobPhase::Paused => "paused",
        JobPhase::Finished => "finished",
        JobPhase::Failed => "failed",
    }
}

/// `12m05s`, `1h02m`, `7s`.
pub fn format_duration(secs: f64) -> String {
    let s = secs.max(0.0).round() as u64;
    match s {
        0..=59 => format!("{s}s"),
        60..=3599 => format!("{}m{:02}s", s / 60, s % 60),
        _ => format!("{}h{:02}m", s / 3600, (s % 3600) / 60),
    }
}

/// One line: bar, pages done of total, pages left, average seconds per page, ETA.
pub fn render(s: &JobState) -> String {
    let label = phase_label(s.phase);
    let Some(total) = s.pages_total else {
        return format!("{label}: {} pages so far", s.pages_done);
    };
    let frac = if total == 0 {
        1.0
    } else {
        (s.pages_done as f64 / total as f64).min(1.0)
    };
    let filled = (frac * BAR_WIDTH as f64).floor() as usize;
    let bar: String = "#".repeat(filled) + &"-".repeat(BAR_WIDTH - filled);
    let left = s.pages_left.unwrap_or(total.saturating_sub(s.pages_done));
    let eta = s
        .eta_seconds
        .map(format_duration)
        .unwrap_or_else(|| "?".into());
    format!(
        "[{bar}] {:>3.0}% {}/{total} pages, {left} left, {:.2} s/page, ETA {eta}, {} tables ({label})",
        frac * 100.0,
        s.pages_done,
        s.avg_page_seconds,
        s.tables_written,
    )
}
