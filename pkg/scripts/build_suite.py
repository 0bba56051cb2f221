"""Generate the shipped app graphs and the core task suite.

Difficulty and reference solutions come from the BFS oracle; the script also lints
every instruction against the widgets on its reference path and Monte-Carlo checks
that a uniform random policy stays below 20% success on tasks of difficulty >= 4.

    python scripts/build_suite.py            # rewrite src/guirl/data/{apps,suites}
    python scripts/build_suite.py --check    # validate only
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

import numpy as np

from guirl.simdevice import (
    AppGraph,
    AppRegistry,
    Done,
    GoalPredicate,
    Tap,
    TaskSpec,
    TaskSuite,
    TypeText,
    quoted_tokens,
    shortest_path,
    task_oracle,
    tokenize,
    transition_actions,
    verify_outcome,
)

DATA = Path(__file__).resolve().parents[1] / "src" / "guirl" / "data"

TITLE_BOX = [60, 80, 1020, 220]


def row_box(i: int) -> list[int]:
    y1 = 280 + i * 240
    return [60, y1, 1020, y1 + 180]


class AppBuilder:
    def __init__(self, app_id: str, initial_vars=None, seeded_vars=None):
        self.doc = {
            "app_id": app_id,
            "screen_dims": [1080, 2400],
            "initial_screen": "home",
            "initial_vars": dict(initial_vars or {}),
            "seeded_vars": dict(seeded_vars or {}),
            "screens": {},
            "transitions": [],
        }

    def screen(self, sid: str, title: str, rows, back: str | None = "home"):
        widgets = [{"id": "title", "kind": "label", "bbox": TITLE_BOX, "text": title, "enabled": False}]
        for i, row in enumerate(rows):
            wid, kind, text, *rest = row
            widgets.append({"id": wid, "kind": kind, "bbox": row_box(i), "text": text,
                            "enabled": rest[0] if rest else True})
        self.doc["screens"][sid] = widgets
        if back is not None:
            self.doc["transitions"].append({"screen": sid, "on": {"back": True}, "to": back})
        return self

    def tap(self, screen: str, wid: str, to: str | None = None, **effects):
        t = {"screen": screen, "on": {"tap": wid}}
        if to is not None:
            t["to"] = to
        t.update(effects)
        self.doc["transitions"].append(t)
        return self

    def typ(self, screen: str, wid: str, bind: str, to: str | None = None):
        t = {"screen": screen, "on": {"type": wid}, "bind": bind}
        if to is not None:
            t["to"] = to
        self.doc["transitions"].append(t)
        return self

    def result(self, sid: str, message: str):
        self.screen(sid, message, [("ok", "button", "OK")])
        self.tap(sid, "ok", "home")
        return self


def settings_app() -> AppBuilder:
    a = AppBuilder("settings", initial_vars={"font": "medium", "dark": "off", "pending": "off",
                                             "ssid": "", "btname": "pixel", "brightness": "auto"})
    a.screen("home", "Settings", [("net", "button", "Network"), ("disp", "button", "Display"),
                                  ("snd", "button", "Sound"), ("bat", "button", "Battery"),
                                  ("about", "button", "About")], back=None)
    for wid, to in [("net", "network"), ("disp", "display"), ("snd", "sound"), ("bat", "battery"), ("about", "about")]:
        a.tap("home", wid, to)
    a.screen("network", "Network", [("wifi", "button", "Wifi"), ("bt", "button", "Bluetooth"),
                                    ("hot", "button", "Hotspot")])
    a.tap("network", "wifi", "wifi").tap("network", "bt", "bluetooth").tap("network", "hot", "hotspot")
    a.screen("hotspot", "Hotspot", [("share", "toggle", "Sharing", False)], back="network")
    a.screen("wifi", "Wifi", [("add", "button", "Add"), ("saved", "button", "Saved")], back="network")
    a.tap("wifi", "add", "wifi_form").tap("wifi", "saved", "wifi_saved")
    a.screen("wifi_saved", "Saved networks", [("none", "label", "Nothing here", False)], back="wifi")
    a.screen("wifi_form", "New network", [("name", "text_field", "Name"), ("cancel", "button", "Cancel")],
             back="wifi")
    a.typ("wifi_form", "name", "ssid", "wifi_filled").tap("wifi_form", "cancel", "wifi")
    a.screen("wifi_filled", "New network {ssid}", [("name", "text_field", "Name"), ("join", "button", "Join"),
                                                   ("cancel", "button", "Cancel")], back="wifi")
    a.typ("wifi_filled", "name", "ssid").tap("wifi_filled", "join", "wifi_joined")
    a.tap("wifi_filled", "cancel", "wifi", set={"ssid": ""})
    a.result("wifi_joined", "Wifi joined")
    a.screen("bluetooth", "Bluetooth", [("pair", "button", "Pair"), ("rename", "button", "Rename")],
             back="network")
    a.tap("bluetooth", "pair", "bt_pair").tap("bluetooth", "rename", "bt_form")
    a.screen("bt_pair", "Searching", [("stop", "button", "Stop")], back="bluetooth")
    a.tap("bt_pair", "stop", "bluetooth")
    a.screen("bt_form", "Device name", [("field", "text_field", "Device"), ("cancel", "button", "Cancel")],
             back="bluetooth")
    a.typ("bt_form", "field", "btname", "bt_filled").tap("bt_form", "cancel", "bluetooth")
    a.screen("bt_filled", "Device name", [("field", "text_field", "Device"), ("save", "button", "Save"),
                                          ("cancel", "button", "Cancel")], back="bluetooth")
    a.typ("bt_filled", "field", "btname").tap("bt_filled", "save", "bt_saved")
    a.tap("bt_filled", "cancel", "bluetooth")
    a.result("bt_saved", "Bluetooth renamed")
    a.screen("display", "Display", [("bright", "button", "Brightness"), ("dark", "toggle", "Dark"),
                                    ("font", "button", "Font")])
    a.tap("display", "bright", "brightness").tap("display", "font", "font")
    a.tap("display", "dark", "display_pending", set={"pending": "on"})
    a.screen("display_pending", "Preview", [("dark", "toggle", "Dark", False), ("apply", "button", "Apply"),
                                            ("cancel", "button", "Cancel")], back="display")
    a.tap("display_pending", "apply", "display_applied", set={"dark": "on", "pending": "off"})
    a.tap("display_pending", "cancel", "display", set={"pending": "off"})
    a.result("display_applied", "Dark theme applied")
    a.screen("font", "Font", [("small", "list_item", "Small"), ("medium", "list_item", "Medium"),
                              ("large", "list_item", "Large")], back="display")
    for size in ("small", "medium", "large"):
        a.tap("font", size, "font_set", set={"font": size})
    a.result("font_set", "Font updated")
    a.screen("brightness", "Brightness", [("dim", "list_item", "Dim"), ("vivid", "list_item", "Vivid")],
             back="display")
    a.tap("brightness", "dim", "bright_set", set={"brightness": "dim"})
    a.tap("brightness", "vivid", "bright_set", set={"brightness": "vivid"})
    a.result("bright_set", "Brightness updated")
    a.screen("sound", "Sound", [("vol", "button", "Volume"), ("ring", "button", "Ringtone"),
                                ("silent", "button", "Silent")])
    a.tap("sound", "vol", "volume").tap("sound", "ring", "ringtone")
    a.tap("sound", "silent", "sound_set", set={"mode": "silent"})
    a.screen("volume", "Volume", [("lvl", "label", "Level", False)], back="sound")
    a.screen("ringtone", "Ringtone", [("chime", "list_item", "Chime"), ("bell", "list_item", "Bell"),
                                      ("pulse", "list_item", "Pulse")], back="sound")
    for tone in ("chime", "bell", "pulse"):
        a.tap("ringtone", tone, "sound_set", set={"ringtone": tone})
    a.result("sound_set", "Sound updated")
    a.screen("battery", "Battery", [("saver", "button", "Saver"), ("usage", "button", "Usage")])
    a.tap("battery", "saver", "battery_saver").tap("battery", "usage", "battery_usage")
    a.screen("battery_saver", "Saver", [("level", "label", "Threshold", False)], back="battery")
    a.screen("battery_usage", "Usage", [("chart", "label", "Chart", False)], back="battery")
    a.screen("about", "About", [("legal", "button", "Legal"), ("model", "label", "Model", False)])
    a.tap("about", "legal", "legal")
    a.screen("legal", "Legal", [("lic", "button", "Licenses"), ("terms", "button", "Terms")], back="about")
    a.tap("legal", "lic", "licenses").tap("legal", "terms", "terms")
    a.screen("licenses", "Licenses", [("list", "label", "Open source", False)], back="legal")
    a.screen("terms", "Terms", [("txt", "label", "Text", False)], back="legal")
    return a


def notes_app() -> AppBuilder:
    a = AppBuilder("notes", initial_vars={"title": "", "folder": "", "restored": "no"})
    a.screen("home", "Notes", [("compose", "button", "Compose"), ("folders", "button", "Folders"),
                               ("trash", "button", "Trash")], back=None)
    a.tap("home", "compose", "editor", set={"folder": "inbox"}).tap("home", "folders", "folders")
    a.tap("home", "trash", "trash")
    a.screen("editor", "Editor", [("field", "text_field", "Title"), ("discard", "button", "Discard")])
    a.typ("editor", "field", "title", "editor_filled").tap("editor", "discard", "home")
    a.screen("editor_filled", "Editor", [("field", "text_field", "Title"), ("save", "button", "Save"),
                                         ("discard", "button", "Discard")])
    a.typ("editor_filled", "field", "title").tap("editor_filled", "save", "note_saved")
    a.tap("editor_filled", "discard", "home", set={"title": ""})
    a.result("note_saved", "Note stored")
    a.screen("folders", "Folders", [("work", "list_item", "Work"), ("personal", "list_item", "Personal")])
    a.tap("folders", "work", "folder_work").tap("folders", "personal", "folder_personal")
    for f in ("work", "personal"):
        a.screen(f"folder_{f}", f.capitalize(), [("add", "button", "Add"), ("sort", "button", "Sort")],
                 back="folders")
        a.tap(f"folder_{f}", "add", "editor", set={"folder": f})
        a.tap(f"folder_{f}", "sort", f"folder_{f}")
    a.screen("trash", "Trash", [("draft", "list_item", "Draft"), ("memo", "list_item", "Memo")])
    a.tap("trash", "draft", "trash_item", set={"item": "draft"})
    a.tap("trash", "memo", "trash_item", set={"item": "memo"})
    a.screen("trash_item", "Deleted item", [("restore", "button", "Restore"), ("purge", "button", "Erase")],
             back="trash")
    a.tap("trash_item", "restore", "restored", set={"restored": "yes"})
    a.tap("trash_item", "purge", "trash")
    a.result("restored", "Restored {item}")
    return a


def clock_app() -> AppBuilder:
    a = AppBuilder("clock", initial_vars={"hour": "", "minute": "", "label": "", "enabled": "no",
                                          "timer": "", "city": ""})
    a.screen("home", "Clock", [("alarms", "button", "Alarms"), ("timer", "button", "Timer"),
                               ("stopwatch", "button", "Stopwatch"), ("world", "button", "World")], back=None)
    a.tap("home", "alarms", "alarms").tap("home", "timer", "timer").tap("home", "stopwatch", "stopwatch")
    a.tap("home", "world", "world")
    a.screen("stopwatch", "Stopwatch", [("lap", "button", "Lap")])
    a.screen("alarms", "Alarms", [("add", "button", "Add"), ("edit", "button", "Edit")])
    a.tap("alarms", "add", "alarm_hour").tap("alarms", "edit", "alarms")
    a.screen("alarm_hour", "Hour", [("six", "list_item", "Six"), ("seven", "list_item", "Seven"),
                                    ("eight", "list_item", "Eight")], back="alarms")
    for h in ("six", "seven", "eight"):
        a.tap("alarm_hour", h, "alarm_minute", set={"hour": h})
    a.screen("alarm_minute", "Minute", [("zero", "list_item", "Zero"), ("fifteen", "list_item", "Fifteen"),
                                        ("thirty", "list_item", "Thirty")], back="alarm_hour")
    for m in ("zero", "fifteen", "thirty"):
        a.tap("alarm_minute", m, "alarm_label", set={"minute": m})
    a.screen("alarm_label", "Alarm", [("field", "text_field", "Label"), ("cancel", "button", "Cancel")],
             back="alarm_minute")
    a.typ("alarm_label", "field", "label", "alarm_filled").tap("alarm_label", "cancel", "alarms")
    a.screen("alarm_filled", "Alarm", [("field", "text_field", "Label"), ("save", "button", "Save"),
                                       ("cancel", "button", "Cancel")], back="alarm_minute")
    a.typ("alarm_filled", "field", "label").tap("alarm_filled", "save", "alarm_saved")
    a.tap("alarm_filled", "cancel", "alarms")
    a.screen("alarm_saved", "Alarms updated", [("enable", "button", "Enable"), ("ok", "button", "OK")])
    a.tap("alarm_saved", "enable", "alarm_on", set={"enabled": "yes"}).tap("alarm_saved", "ok", "home")
    a.result("alarm_on", "Alarms active")
    a.screen("timer", "Timer", [("five", "list_item", "Five"), ("ten", "list_item", "Ten"),
                                ("twenty", "list_item", "Twenty")])
    for m in ("five", "ten", "twenty"):
        a.tap("timer", m, "timer_ready", set={"timer": m})
    a.screen("timer_ready", "Timer {timer}", [("start", "button", "Start"), ("reset", "button", "Reset")],
             back="timer")
    a.tap("timer_ready", "start", "timer_running").tap("timer_ready", "reset", "timer", set={"timer": ""})
    a.screen("timer_running", "Timer running", [("pause", "button", "Pause")])
    a.tap("timer_running", "pause", "timer_ready")
    a.screen("world", "World", [("add", "button", "Add"), ("sort", "button", "Sort")])
    a.tap("world", "add", "city_form").tap("world", "sort", "world")
    a.screen("city_form", "City", [("field", "text_field", "City"), ("cancel", "button", "Cancel")], back="world")
    a.typ("city_form", "field", "city", "city_filled").tap("city_form", "cancel", "world")
    a.screen("city_filled", "City", [("field", "text_field", "City"), ("confirm", "button", "Confirm"),
                                     ("cancel", "button", "Cancel")], back="world")
    a.typ("city_filled", "field", "city").tap("city_filled", "confirm", "city_added")
    a.tap("city_filled", "cancel", "world", set={"city": ""})
    a.result("city_added", "City listed")
    return a


def mail_app() -> AppBuilder:
    a = AppBuilder("mail", initial_vars={"to": "", "signature": "", "moved": ""},
                   seeded_vars={"unread": ["2", "3", "5", "8", "13", "21", "34"]})
    a.screen("home", "Mail {unread} unread", [("compose", "button", "Compose"), ("inbox", "button", "Inbox"),
                                              ("sent", "button", "Sent"), ("settings", "button", "Settings")],
             back=None)
    a.tap("home", "compose", "compose").tap("home", "inbox", "inbox").tap("home", "sent", "sent")
    a.tap("home", "settings", "mail_settings")
    a.screen("compose", "Message", [("field", "text_field", "Recipient"), ("discard", "button", "Discard")])
    a.typ("compose", "field", "to", "compose_filled").tap("compose", "discard", "home")
    a.screen("compose_filled", "Message", [("field", "text_field", "Recipient"), ("send", "button", "Send"),
                                           ("discard", "button", "Discard")])
    a.typ("compose_filled", "field", "to").tap("compose_filled", "send", "mail_sent")
    a.tap("compose_filled", "discard", "home", set={"to": ""})
    a.result("mail_sent", "Delivered")
    a.screen("inbox", "Inbox", [("invoice", "list_item", "Invoice"), ("newsletter", "list_item", "Newsletter")])
    a.tap("inbox", "invoice", "message", set={"open": "invoice"})
    a.tap("inbox", "newsletter", "message", set={"open": "newsletter"})
    a.screen("message", "Message", [("move", "button", "Move"), ("reply", "button", "Reply")], back="inbox")
    a.tap("message", "move", "move").tap("message", "reply", "compose")
    a.screen("move", "Destination", [("archive", "list_item", "Archive"), ("spam", "list_item", "Spam")],
             back="message")
    a.tap("move", "archive", "moved", set={"moved": "archive"}).tap("move", "spam", "moved", set={"moved": "spam"})
    a.result("moved", "Moved to {moved}")
    a.screen("sent", "Sent", [("report", "list_item", "Report"), ("agenda", "list_item", "Agenda")])
    a.tap("sent", "report", "sent_item", set={"open": "report"})
    a.tap("sent", "agenda", "sent_item", set={"open": "agenda"})
    a.screen("sent_item", "{open}", [("forward", "button", "Forward")], back="sent")
    a.tap("sent_item", "forward", "compose")
    a.screen("mail_settings", "Preferences", [("signature", "button", "Signature"), ("theme", "button", "Theme")])
    a.tap("mail_settings", "signature", "sig_form").tap("mail_settings", "theme", "mail_settings")
    a.screen("sig_form", "Signature", [("field", "text_field", "Closing"), ("cancel", "button", "Cancel")],
             back="mail_settings")
    a.typ("sig_form", "field", "signature", "sig_filled").tap("sig_form", "cancel", "mail_settings")
    a.screen("sig_filled", "Signature", [("field", "text_field", "Closing"), ("save", "button", "Save"),
                                         ("cancel", "button", "Cancel")], back="mail_settings")
    a.typ("sig_filled", "field", "signature").tap("sig_filled", "save", "sig_saved")
    a.tap("sig_filled", "cancel", "mail_settings")
    a.result("sig_saved", "Signature saved")
    return a


PRODUCTS = {
    "nova": ("phones", "Nova"),
    "lumo": ("phones", "Lumo"),
    "orbit": ("cameras", "Orbit"),
    "zeta": ("laptops", "Zeta"),
    "atlas": ("books", "Atlas"),
    "fable": ("books", "Fable"),
}


def shop_app() -> AppBuilder:
    a = AppBuilder("shop", initial_vars={"item": "", "address": ""})
    a.screen("home", "Shop", [("cats", "button", "Categories"), ("deals", "button", "Deals"),
                              ("wish", "button", "Wishlist"), ("account", "button", "Account")], back=None)
    a.tap("home", "cats", "categories").tap("home", "deals", "deals").tap("home", "wish", "wishlist")
    a.tap("home", "account", "account")
    a.screen("account", "Account", [("orders", "button", "Orders")])
    a.screen("categories", "Categories", [("elec", "button", "Electronics"), ("books", "button", "Books"),
                                          ("garden", "button", "Garden")])
    a.tap("categories", "elec", "electronics").tap("categories", "books", "books")
    a.tap("categories", "garden", "garden")
    a.screen("garden", "Garden", [("empty", "label", "Coming soon", False)], back="categories")
    a.screen("electronics", "Electronics", [("phones", "button", "Phones"), ("laptops", "button", "Laptops"),
                                            ("cameras", "button", "Cameras")], back="categories")
    for sub in ("phones", "laptops", "cameras"):
        a.tap("electronics", sub, sub)
    listing = {}
    for pid, (cat, name) in PRODUCTS.items():
        listing.setdefault(cat, []).append((pid, name))
    for cat, items in listing.items():
        parent = "categories" if cat == "books" else "electronics"
        a.screen(cat, cat.capitalize(), [(pid, "list_item", name) for pid, name in items], back=parent)
        for pid, _ in items:
            a.tap(cat, pid, f"product_{pid}")
    for pid, (cat, name) in PRODUCTS.items():
        a.screen(f"product_{pid}", name, [("add", "button", "Add to bag"), ("reviews", "button", "Reviews")],
                 back=cat)
        a.tap(f"product_{pid}", "add", "added", set={"item": pid})
        a.tap(f"product_{pid}", "reviews", f"product_{pid}")
    a.screen("deals", "Deals", [("lumo", "list_item", "Lumo"), ("fable", "list_item", "Fable")])
    a.tap("deals", "lumo", "product_lumo").tap("deals", "fable", "product_fable")
    a.screen("wishlist", "Wishlist", [("empty", "label", "Nothing saved", False)])
    a.screen("added", "Added", [("view", "button", "View bag"), ("more", "button", "Continue")])
    a.tap("added", "view", "bag").tap("added", "more", "home")
    a.screen("bag", "Bag", [("checkout", "button", "Checkout"), ("remove", "button", "Remove")])
    a.tap("bag", "checkout", "checkout").tap("bag", "remove", "home", set={"item": ""})
    a.screen("checkout", "Checkout", [("field", "text_field", "Address"), ("cancel", "button", "Cancel")],
             back="bag")
    a.typ("checkout", "field", "address", "checkout_filled").tap("checkout", "cancel", "bag")
    a.screen("checkout_filled", "Checkout", [("field", "text_field", "Address"), ("confirm", "button", "Confirm"),
                                             ("cancel", "button", "Cancel")], back="bag")
    a.typ("checkout_filled", "field", "address").tap("checkout_filled", "confirm", "review")
    a.tap("checkout_filled", "cancel", "bag", set={"address": ""})
    a.screen("review", "Review order for {item}", [("pay", "button", "Pay"), ("edit", "button", "Edit")], back="checkout_filled")
    a.tap("review", "pay", "paid").tap("review", "edit", "checkout_filled")
    a.result("paid", "Paid for {item}")
    return a


def goal(screen=None, **vars_) -> GoalPredicate:
    return GoalPredicate(screen, tuple(vars_.items()))


TASKS = [
    ("sound_silent", "settings", "Open Sound and pick Silent", goal("sound_set", mode="silent")),
    ("mail_sent_report", "mail", "Open Sent and select the Report", goal("sent_item", open="report")),
    ("settings_font", "settings", "Open Display, then Font, and pick Large", goal(font="large")),
    ("settings_dark", "settings", "Open Display, switch Dark on and Apply", goal(dark="on")),
    ("notes_compose", "notes", "Compose a note titled 'groceries' and Save", goal("note_saved", title="groceries")),
    ("clock_timer", "clock", "Open Timer, choose Five and Start", goal("timer_running", timer="five")),
    ("shop_deal", "shop", "Open Deals, pick Lumo, Add to bag, then View bag", goal("bag", item="lumo")),
    ("settings_ringtone", "settings", "Open Sound, Ringtone, and choose Bell", goal(ringtone="bell")),
    ("clock_world", "clock", "Open World, Add the city 'tokyo' and Confirm", goal("city_added", city="tokyo")),
    ("mail_archive", "mail", "Open Inbox, select Invoice, Move it to Archive", goal(moved="archive", open="invoice")),
    ("mail_signature", "mail", "Open Settings, Signature, set 'cheers' and Save", goal("sig_saved", signature="cheers")),
    ("notes_restore", "notes", "Open Trash, select Memo and Restore it", goal("restored", item="memo")),
    ("settings_wifi", "settings", "Open Network, Wifi, Add 'homenet' and Join", goal("wifi_joined", ssid="homenet")),
    ("settings_bt", "settings", "Open Network, Bluetooth, Rename it 'falcon' and Save", goal("bt_saved", btname="falcon")),
    ("notes_folder", "notes", "Open Folders, Work, Add a note titled 'budget' and Save",
     goal("note_saved", title="budget", folder="work")),
    ("clock_alarm", "clock", "Open Alarms, Add Seven Thirty labelled 'gym' and Save",
     goal("alarm_saved", hour="seven", minute="thirty", label="gym")),
    ("clock_alarm_enable", "clock", "Open Alarms, Add Six Fifteen labelled 'run', Save and Enable",
     goal(hour="six", minute="fifteen", label="run", enabled="yes")),
    ("shop_atlas", "shop", "Browse Categories, Books, pick Atlas, Add to bag, View bag, Checkout, ship 'rome', Confirm",
     goal("review", item="atlas", address="rome")),
    ("shop_orbit", "shop",
     "Browse Categories, Electronics, Cameras, pick Orbit, Add to bag, View bag, Checkout, ship 'oslo', Confirm",
     goal("review", item="orbit", address="oslo")),
    ("shop_nova", "shop",
     "Browse Categories, Electronics, Phones, pick Nova, Add to bag, View bag, Checkout, ship 'paris', Confirm and Pay",
     goal("paid", item="nova", address="paris")),
]


def lint_task(app: AppGraph, task: TaskSpec) -> list[str]:
    """The reference path must be readable from the instruction: on every state of the path,
    the tapped widget is the only tap target sharing words with the instruction."""
    problems = []
    words = set(tokenize(task.instruction))
    quoted = quoted_tokens(task.instruction)
    state = app.initial_state(task.init_seed)
    path = list(task.reference_solution) + [Done()]
    for step, action in enumerate(path):
        overlapping = [w.widget_id for w in state.widgets
                       if w.enabled and w.kind != "text_field" and words & set(tokenize(w.text))]
        if isinstance(action, Tap):
            hit = [w for w in state.widgets if w.contains(action.x, action.y)][-1]
            if overlapping != [hit.widget_id]:
                problems.append(f"step {step} on {state.screen_id}: want {hit.widget_id}, overlap {overlapping}")
        else:
            if overlapping:
                problems.append(f"step {step} on {state.screen_id}: expected no overlap, got {overlapping}")
            if isinstance(action, TypeText) and action.text not in quoted:
                problems.append(f"step {step}: typed token {action.text!r} not quoted")
        if not isinstance(action, Done):
            state, _ = app.transition(state, action)
    labels = [w.text for w in state.widgets if w.kind == "label"]
    if not any(words & set(tokenize(t)) for t in labels):
        problems.append(f"goal screen {state.screen_id} has no label echoing the instruction: {labels}")
    return problems


def loop_free_lengths(app: AppGraph, task: TaskSpec, limit: int, registry: AppRegistry) -> set[int]:
    """Lengths of goal-reaching routes that never revisit a state, up to ``limit``."""
    oracle = task_oracle(task, registry)
    found: set[int] = set()
    start = app.initial_state(task.init_seed)

    def dfs(state, depth, visited):
        if verify_outcome(state, task):
            found.add(depth)
            return
        for action in transition_actions(state, task, app):
            nxt, invalid = app.transition(state, action)
            key = oracle.key(nxt)
            if invalid is None and key not in visited and depth + 1 + oracle.distance(nxt) <= limit:
                visited.add(key)
                dfs(nxt, depth + 1, visited)
                visited.discard(key)

    dfs(start, 0, {oracle.key(start)})
    return found


def random_success_rate(app: AppGraph, task: TaskSpec, episodes: int, rng) -> float:
    wins = 0
    for _ in range(episodes):
        state = app.initial_state(task.init_seed)
        for _ in range(task.max_steps):
            cands = transition_actions(state, task) + [Done()]
            action = cands[rng.integers(len(cands))]
            if isinstance(action, Done):
                break
            state, _ = app.transition(state, action)
        wins += verify_outcome(state, task)
    return wins / episodes


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--check", action="store_true", help="validate without writing files")
    ap.add_argument("--mc-episodes", type=int, default=2000)
    args = ap.parse_args()

    builders = [settings_app(), notes_app(), clock_app(), mail_app(), shop_app()]
    apps = {b.doc["app_id"]: AppGraph(b.doc) for b in builders}
    registry = AppRegistry(apps.values())
    rng = np.random.default_rng(0)
    tasks = []
    failed = False
    for task_id, app_id, instruction, g in TASKS:
        draft = TaskSpec(task_id, instruction, app_id, g, init_seed=len(tasks))
        app = apps[app_id]
        start = app.initial_state(draft.init_seed)
        d = task_oracle(draft, registry).distance(start)
        path = shortest_path(start, draft, registry)
        lengths = loop_free_lengths(app, draft, int(d) + 3, registry)
        tags = ["variable_length"] if len(lengths) > 1 else []
        task = TaskSpec(task_id, instruction, app_id, g, init_seed=draft.init_seed, difficulty=int(d),
                        reference_solution=tuple(path), tags=tuple(tags))
        problems = lint_task(app, task)
        sr = random_success_rate(app, task, args.mc_episodes, rng)
        print(f"{task_id:22s} d={int(d):2d} routes={sorted(lengths)} random_sr={sr:.3f} "
              f"{'LINT ' + '; '.join(problems) if problems else ''}")
        if problems or (d >= 4 and sr > 0.2) or not 2 <= d <= 10:
            failed = True
        tasks.append(task)
    diffs = sorted(t.difficulty for t in tasks)
    print("difficulties:", diffs, "variable_length:", sum("variable_length" in t.tags for t in tasks))
    if failed:
        raise SystemExit("suite validation failed")
    if args.check:
        return
    (DATA / "apps").mkdir(parents=True, exist_ok=True)
    (DATA / "suites").mkdir(parents=True, exist_ok=True)
    for app_id, b in sorted((b.doc["app_id"], b) for b in builders):
        (DATA / "apps" / f"{app_id}.json").write_text(json.dumps(b.doc, indent=1) + "\n")
    suite = TaskSuite("core", tuple(tasks))
    (DATA / "suites" / "core.json").write_text(json.dumps(suite.to_dict(), indent=1) + "\n")
    print("wrote", DATA)


if __name__ == "__main__":
    main()
