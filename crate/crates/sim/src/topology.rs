use rand::seq::SliceRandom;
use rand::Rng;

use unitrank_core::fdg::{build_fdg, Component, ComponentRelations, FailureClass, FailureUnit, Fdg, SystemCatalog};

use crate::config::{SimConfig, Tier};
use crate::error::Result;

/// Generated system: components, their relations, units and the FDG.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub catalog: SystemCatalog,
    pub relations: ComponentRelations,
    pub fdg: Fdg,
}

fn component_id(tier: Tier, i: usize) -> String {
    format!("{}-{i:02}", tier.name())
}

/// Layered call DAG over services, one service per container (extra
/// containers become replicas), containers spread over hosts.
pub fn generate_topology<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Result<Topology> {
    let mut components = Vec::new();
    for (tier, n) in [(Tier::Service, cfg.n_services), (Tier::Container, cfg.n_containers), (Tier::Host, cfg.n_hosts)] {
        for i in 0..n {
            components.push(Component { id: component_id(tier, i), class_name: tier.name().into() });
        }
    }
    let mut relations = ComponentRelations::default();

    // Roughly three layers; every non-entry service is called by one or two
    // services of the previous layer.
    let layers = cfg.n_services.min(3);
    let layer_of = |i: usize| i * layers / cfg.n_services;
    for callee in 0..cfg.n_services {
        let l = layer_of(callee);
        if l == 0 {
            continue;
        }
        let mut callers: Vec<usize> = (0..cfg.n_services).filter(|&c| layer_of(c) == l - 1).collect();
        callers.shuffle(rng);
        let k = rng.random_range(1..=2.min(callers.len()));
        for &caller in &callers[..k] {
            relations.call.push((component_id(Tier::Service, caller), component_id(Tier::Service, callee)));
        }
    }

    for c in 0..cfg.n_containers {
        let service = if c < cfg.n_services { c } else { rng.random_range(0..cfg.n_services) };
        relations.deploy.push((component_id(Tier::Container, c), component_id(Tier::Service, service)));
        let host = if c < cfg.n_hosts { c } else { rng.random_range(0..cfg.n_hosts) };
        relations.deploy.push((component_id(Tier::Host, host), component_id(Tier::Container, c)));
    }
    // With fewer containers than services, the remaining services share the
    // last container.
    for s in cfg.n_containers..cfg.n_services {
        relations.deploy.push((component_id(Tier::Container, cfg.n_containers - 1), component_id(Tier::Service, s)));
    }

    let mut classes = Vec::new();
    let mut units = Vec::new();
    for template in &cfg.classes {
        classes.push(FailureClass {
            id: template.id.clone(),
            component_class: template.tier.name().into(),
            metric_names: template.metrics.clone(),
        });
        for c in components.iter().filter(|c| c.class_name == template.tier.name()) {
            units.push(FailureUnit {
                id: format!("{}/{}", c.id, template.id),
                component_id: c.id.clone(),
                class_id: template.id.clone(),
            });
        }
    }
    let fdg = build_fdg(&components, &units, &relations, &[], &[], cfg.start_time)?;
    let catalog = SystemCatalog { components, classes, units };
    catalog.validate()?;
    Ok(Topology { catalog, relations, fdg })
}
