#![allow(dead_code)]

use std::sync::Arc;
use std::time::Duration;

use deepsurf::probing::{write_plan_jsonl, PlanConfig};
use deepsurf::simulator::{generate_site, SimTransport, Site, SiteSpec};
use deepsurf::surfacer::{surface_site, FakeClock, FetchPolicy, Fetcher, SurfaceOptions};
use deepsurf::{SurfacingPlan, SurfacingReport};

pub const HOST: &str = "sim.test";

pub fn site(spec: &SiteSpec) -> Arc<Site> {
    Arc::new(generate_site(spec).expect("valid spec"))
}

pub fn fetcher(site: &Arc<Site>, policy: FetchPolicy) -> (Fetcher, Arc<FakeClock>) {
    let clock = Arc::new(FakeClock::new());
    let transport = SimTransport::new().with_site(HOST, Arc::clone(site));
    (
        Fetcher::new(Arc::new(transport), policy, clock.clone()),
        clock,
    )
}

pub fn fast_policy() -> FetchPolicy {
    FetchPolicy {
        min_delay_per_host: Duration::from_millis(100),
        ..FetchPolicy::default()
    }
}

pub struct Run {
    pub plan: SurfacingPlan,
    pub report: SurfacingReport,
    pub fetcher: Fetcher,
}

impl Run {
    pub fn urls(&self) -> Vec<String> {
        self.plan.entries.iter().map(|e| e.url.clone()).collect()
    }

    pub fn jsonl(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        write_plan_jsonl(&self.plan, &mut buf).unwrap();
        buf
    }
}

pub fn surface(site: &Arc<Site>, plan: PlanConfig, policy: FetchPolicy) -> Run {
    let (fetcher, _) = fetcher(site, policy);
    let options = SurfaceOptions {
        plan,
        ..SurfaceOptions::default()
    };
    let (plan, report) =
        surface_site(&fetcher, &format!("http://{HOST}/"), &options).expect("surfacing succeeds");
    Run {
        plan,
        report,
        fetcher,
    }
}
