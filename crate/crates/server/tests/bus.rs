use std::collections::BTreeMap;
use std::time::Duration;

use gridops_server::bus::{Broker, BusError, Filter, Publisher};
use serde_json::json;

#[test]
fn per_publisher_order_without_gaps_or_duplicates() {
    let broker = Broker::new();
    let sub = broker.connect("reader", None);
    sub.subscribe("data/#").unwrap();
    let threads: Vec<_> = (0..4)
        .map(|p| {
            let broker = broker.clone();
            std::thread::spawn(move || {
                let publisher = Publisher::new(&format!("p{p}"));
                for i in 0..200 {
                    broker.publish(&publisher, &format!("data/p{p}"), 0.0, false, &json!({ "p": p, "i": i })).unwrap();
                }
            })
        })
        .collect();
    let mut seen: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
    while seen.values().map(Vec::len).sum::<usize>() < 800 {
        let env = sub.recv_timeout(Duration::from_secs(5)).unwrap().expect("message within 5 s");
        let v = env.payload_value();
        assert_eq!(v["i"].as_u64().unwrap() + 1, env.seq);
        seen.entry(v["p"].as_u64().unwrap()).or_default().push(env.seq);
    }
    for t in threads {
        t.join().unwrap();
    }
    for seqs in seen.values() {
        assert_eq!(*seqs, (1..=200).collect::<Vec<u64>>());
    }
    assert!(sub.try_recv().is_none());
}

#[test]
fn retained_value_arrives_before_live_traffic() {
    let broker = Broker::new();
    let p = Publisher::new("engine");
    broker.publish(&p, "data/system", 10.0, true, &json!({ "v": 1 })).unwrap();
    broker.publish(&p, "data/system", 12.0, true, &json!({ "v": 2 })).unwrap();
    let sub = broker.connect("late", None);
    sub.subscribe("data/+").unwrap();
    broker.publish(&p, "data/system", 14.0, true, &json!({ "v": 3 })).unwrap();
    let got: Vec<_> = sub.drain().iter().map(|e| (e.payload_value()["v"].as_u64().unwrap(), e.retain)).collect();
    assert_eq!(got, vec![(2, true), (3, true)]);
}

#[test]
fn overlapping_subscriptions_each_get_a_copy() {
    let broker = Broker::new();
    let sub = broker.connect("c", None);
    sub.subscribe("data/#").unwrap();
    sub.subscribe("data/+/all").unwrap();
    sub.subscribe("data/bus/all").unwrap();
    broker.publish(&Publisher::new("e"), "data/bus/all", 0.0, false, &1).unwrap();
    assert_eq!(sub.drain().len(), 3);
    sub.unsubscribe("data/bus/all");
    sub.unsubscribe("data/bus/all");
    broker.publish(&Publisher::new("e"), "data/bus/all", 0.0, false, &1).unwrap();
    assert_eq!(sub.drain().len(), 2);
}

#[test]
fn malformed_filters_are_refused() {
    let broker = Broker::new();
    let sub = broker.connect("c", None);
    for bad in ["", "a/#/b", "a/b#", "a/+b", "a//b", "/a"] {
        assert!(matches!(sub.subscribe(bad), Err(BusError::Topic(_))), "{bad:?}");
    }
    assert!(Filter::parse("#").is_ok());
    assert!(sub.subscribe("+/+/#").is_ok());
}

#[test]
fn publishing_to_a_wildcard_topic_is_an_error() {
    let broker = Broker::new();
    assert!(broker.publish(&Publisher::new("e"), "data/#", 0.0, false, &1).is_err());
    assert!(broker.publish(&Publisher::new("e"), "data/+/x", 0.0, false, &1).is_err());
}

#[test]
fn grants_filter_delivery_silently() {
    let broker = Broker::new();
    let sub = broker.connect("op", Some(vec![Filter::parse("data/#").unwrap()]));
    sub.subscribe("#").unwrap();
    let p = Publisher::new("e");
    broker.publish(&p, "command/SetGenMW", 0.0, false, &1).unwrap();
    broker.publish(&p, "data/system", 0.0, false, &2).unwrap();
    let got = sub.drain();
    assert_eq!(got.len(), 1);
    assert_eq!(got[0].topic, "data/system");
}

#[test]
fn slow_subscriber_is_evicted_with_an_alarm() {
    let broker = Broker::with_bound(8);
    let slow = broker.connect("slow", None);
    slow.subscribe("data/#").unwrap();
    let watcher = broker.connect("watcher", None);
    watcher.subscribe("notif/alarm").unwrap();
    let p = Publisher::new("e");
    for i in 0..20 {
        broker.publish(&p, "data/x", i as f64, false, &i).unwrap();
    }
    assert_eq!(broker.client_count(), 1);
    let alarms = watcher.drain();
    assert_eq!(alarms.len(), 1);
    let n = alarms[0].payload_value();
    assert_eq!(n["kind"], "subscriber_disconnect");
    assert_eq!(n["origin"], "bus");
    assert_eq!(n["severity"], "alarm");
    assert_eq!(n["detail"]["client"], slow.id());
    // The queued backlog is still readable, then the reason shows up.
    let mut backlog = 0;
    let reason = loop {
        match slow.recv_timeout(Duration::from_millis(100)) {
            Ok(Some(_)) => backlog += 1,
            Ok(None) => panic!("evicted queue should disconnect"),
            Err(reason) => break reason,
        }
    };
    assert_eq!(backlog, 8);
    assert!(reason.contains("overflow"), "{reason}");
}

#[test]
fn queues_stay_flat_when_drained() {
    let broker = Broker::new();
    let subs: Vec<_> = (0..16)
        .map(|i| {
            let s = broker.connect(&format!("c{i}"), None);
            s.subscribe("data/#").unwrap();
            s
        })
        .collect();
    let p = Publisher::new("e");
    for step in 0..50 {
        for t in ["data/bus/all", "data/branch/all", "data/system"] {
            broker.publish(&p, t, step as f64, true, &step).unwrap();
        }
        for s in &subs {
            assert_eq!(s.drain().len(), 3);
        }
        assert!(broker.queue_depths().iter().all(|(_, _, d)| *d == 0));
    }
}

#[test]
fn dropping_a_subscriber_disconnects_it() {
    let broker = Broker::new();
    let sub = broker.connect("c", None);
    let id = sub.id();
    assert_eq!(broker.client_count(), 1);
    drop(sub);
    assert_eq!(broker.client_count(), 0);
    assert_eq!(broker.subscribe(id, "a"), Err(BusError::NotConnected(id)));
}

#[test]
fn hundred_retained_topics_precede_live_traffic() {
    let broker = Broker::new();
    let p = Publisher::new("engine");
    for i in 0..100 {
        broker.publish(&p, &format!("data/area/{i}"), 0.0, true, &i).unwrap();
    }
    let sub = broker.connect("late", None);
    sub.subscribe("data/+/#").unwrap();
    broker.publish(&p, "data/system", 2.0, true, &"live").unwrap();
    let got = sub.drain();
    assert_eq!(got.len(), 101);
    assert!(got[..100].iter().all(|e| e.retain && e.sim_ts == 0.0));
    assert_eq!(got[100].topic, "data/system");
}
